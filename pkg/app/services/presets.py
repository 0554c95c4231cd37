"""
预置实验
table1: 原假设下的水平（i.i.d. 布朗运动、i.i.d. 布朗桥、FARCH(1)）
table2: 备择假设下的功效（FAR(1)，高斯核 / Wiener 核 × 布朗运动 / 布朗桥新息）

参考拒绝率（百分比）为已发表模拟结果，键为 'T/alpha'。
预置实验使用去偏的 M̂² 与 consistent 归一化的 v̂_{H0}。
"""
from typing import Dict, List

from django.conf import settings

from app.lib.core import Grid
from app.lib.inference import H0_CONSISTENT
from app.lib.simulate import DgpSpec
from app.services.monte_carlo import Experiment

PRESET_T_VALUES = (128, 256, 512, 1024)
PRESET_ALPHAS = (0.10, 0.05, 0.01)


def _rates(rows: Dict[int, tuple]) -> Dict[str, float]:
    return {
        f'{T}/{alpha:g}': value
        for T, values in rows.items()
        for alpha, value in zip(PRESET_ALPHAS, values)
    }


REFERENCE_RATES = {
    'iid_bm': _rates({128: (9.5, 4.8, 1.1), 256: (9.6, 5.1, 1.3), 512: (10.1, 5.1, 0.8), 1024: (9.8, 4.9, 0.9)}),
    'iid_bb': _rates({128: (10.8, 5.3, 0.8), 256: (10.3, 5.4, 0.9), 512: (9.7, 5.1, 1.0), 1024: (9.9, 5.2, 0.8)}),
    'farch1': _rates({128: (11.1, 5.7, 0.8), 256: (10.9, 5.5, 0.7), 512: (10.9, 5.3, 0.8), 1024: (10.5, 5.2, 0.7)}),
    'far1-gaussian-bm': _rates({128: (82.6, 80.7, 65.9), 256: (99.0, 98.2, 98.2),
                                512: (99.8, 99.6, 99.6), 1024: (100.0, 99.9, 99.7)}),
    'far1-wiener-bm': _rates({128: (87.6, 82.4, 66.9), 256: (99.4, 98.3, 94.2),
                              512: (99.9, 99.9, 99.6), 1024: (100.0, 100.0, 99.8)}),
    'far1-gaussian-bb': _rates({128: (80.1, 77.4, 60.1), 256: (100.0, 97.0, 95.5),
                                512: (100.0, 99.3, 99.3), 1024: (100.0, 100.0, 100.0)}),
    'far1-wiener-bb': _rates({128: (87.6, 79.9, 61.2), 256: (99.9, 98.3, 98.1),
                              512: (100.0, 100.0, 98.8), 1024: (100.0, 100.0, 100.0)}),
}

PRESETS = ('table1', 'table2')


def _scale(full_scale: bool):
    if full_scale:
        return (getattr(settings, 'FWN_FULL_SCALE_GRID_SIZE', 1000),
                getattr(settings, 'FWN_FULL_SCALE_REPS', 1000))
    return getattr(settings, 'FWN_GRID_SIZE', 100), getattr(settings, 'FWN_REPS', 500)


def build_preset(name: str, seed: int = 0, full_scale: bool = False, T_values=None, alphas=None,
                 n_reps: int = None, grid_size: int = None, burn_in: int = None) -> List[Experiment]:
    """
    构造预置实验列表（每个数据生成过程一个 Experiment）

    Args:
        name: table1 | table2
        full_scale: True 时使用 G=1000、1000 次重复
        T_values/alphas/n_reps/grid_size/burn_in: 覆盖默认值
    """
    default_grid, default_reps = _scale(full_scale)
    grid = Grid.midpoint(grid_size or default_grid)
    T_values = list(T_values or PRESET_T_VALUES)
    alphas = list(alphas or PRESET_ALPHAS)
    n_reps = n_reps or default_reps
    burn_in = getattr(settings, 'FWN_BURN_IN', 200) if burn_in is None else burn_in

    if name == 'table1':
        specs = [DgpSpec(kind=kind, grid=grid, T=T_values[0], seed=seed, burn_in=burn_in)
                 for kind in ('iid_bm', 'iid_bb', 'farch1')]
    elif name == 'table2':
        specs = [DgpSpec(kind='far1', grid=grid, T=T_values[0], seed=seed, kernel=kernel,
                         innovation=innovation, burn_in=burn_in)
                 for innovation in ('bm', 'bb') for kernel in ('gaussian', 'wiener')]
    else:
        raise ValueError(f'未知的预置实验: {name}，可选 {", ".join(PRESETS)}')

    return [
        Experiment(dgp=spec, T_values=T_values, alphas=alphas, n_reps=n_reps, seed=seed,
                   h0_normalization=H0_CONSISTENT, debias=True,
                   name=f'{name}/{spec.label()}', reference_rates=REFERENCE_RATES.get(spec.label(), {}))
        for spec in specs
    ]
