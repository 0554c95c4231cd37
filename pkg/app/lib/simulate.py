"""
数据生成过程
i.i.d. 布朗运动 / 布朗桥、FARCH(1)、FAR(1)（高斯核或 Wiener 核）

具体递推在 app/plugins/dgp_<kind>.py 中实现，这里负责配置、随机流和插件加载。
随机数：NumPy Generator + Philox（基于计数器），每次重复的流由
SeedSequence(seed, spawn_key=(...)) 派生，结果与线程数无关。
"""
import importlib
import logging
from dataclasses import asdict, dataclass, replace
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import integrate

from app.lib.core import BivariateKernel, FunctionalSample, Grid
from app.lib.exceptions import InvalidGeneratorError, SimulationError

logger = logging.getLogger(__name__)

RNG_ALGORITHM = 'Philox4x64-10'

GENERATOR_KINDS = ('iid_bm', 'iid_bb', 'farch1', 'far1')
KERNEL_KINDS = ('gaussian', 'wiener')
INNOVATION_KINDS = ('bm', 'bb')

DEFAULT_HS_NORM = 0.3
DEFAULT_C_PSI = 0.3418
DEFAULT_BURN_IN = 200


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """由主种子和下标（单元、重复）派生独立的随机流"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True, eq=False)
class DgpSpec:
    """
    数据生成过程配置

    Args:
        kind: iid_bm | iid_bb | farch1 | far1
        grid: 网格
        T: 输出曲线条数（不含 burn-in）
        seed: 主种子
        kernel: far1 的算子核 gaussian | wiener
        hs_norm: far1 算子核的 Hilbert-Schmidt 范数，取值 [0,1)
        innovation: far1 的新息 bm | bb
        burn_in: far1 / farch1 丢弃的初始步数
        c_psi: farch1 的波动率常数
        mean: far1 的均值曲线 μ，默认为0
    """
    kind: str
    grid: Grid
    T: int
    seed: int = 0
    kernel: str = 'wiener'
    hs_norm: float = DEFAULT_HS_NORM
    innovation: str = 'bm'
    burn_in: int = DEFAULT_BURN_IN
    c_psi: float = DEFAULT_C_PSI
    mean: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise InvalidGeneratorError(f'未知的数据生成过程: {self.kind}，可选 {", ".join(GENERATOR_KINDS)}')
        if self.T < 1:
            raise InvalidGeneratorError(f'样本长度必须为正: {self.T}')
        if self.burn_in < 0:
            raise InvalidGeneratorError(f'burn-in 不能为负: {self.burn_in}')
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise InvalidGeneratorError(f'种子必须是64位非负整数: {self.seed}')
        if self.kind == 'far1':
            if self.kernel not in KERNEL_KINDS:
                raise InvalidGeneratorError(f'未知的算子核: {self.kernel}')
            if self.innovation not in INNOVATION_KINDS:
                raise InvalidGeneratorError(f'未知的新息类型: {self.innovation}')
            if not 0.0 <= self.hs_norm < 1.0:
                raise InvalidGeneratorError(f'HS 范数必须在 [0,1) 内以保证平稳: {self.hs_norm}')
            if self.mean is not None and len(self.mean) != self.grid.n_points:
                raise InvalidGeneratorError('均值曲线长度与网格点数不一致')
        if self.kind == 'farch1' and self.c_psi < 0:
            raise InvalidGeneratorError(f'c_psi 不能为负: {self.c_psi}')

    def with_length(self, T: int) -> 'DgpSpec':
        return replace(self, T=T)

    def label(self) -> str:
        if self.kind == 'far1':
            return f'far1-{self.kernel}-{self.innovation}'
        return self.kind

    def to_config(self) -> Dict:
        """插件配置以及报告中的元数据（可 JSON 序列化）"""
        data = asdict(self)
        data.pop('grid')
        data['grid_size'] = self.grid.n_points
        data['mean'] = list(map(float, self.mean)) if self.mean is not None else None
        data['rng'] = RNG_ALGORITHM
        return data


def brownian_motion_path(grid: Grid, rng: np.random.Generator, size: int = None) -> np.ndarray:
    """
    标准布朗运动在网格点上的取值

    增量方差等于相邻网格点间距，第一个增量从 0 到 τ_0，
    因此网格节点上的协方差精确为 min(τ,σ)。

    Args:
        size: 路径条数；为 None 时返回一条曲线

    Returns:
        np.ndarray: 形状 (G,) 或 (size, G)
    """
    steps = np.sqrt(np.diff(grid.points, prepend=0.0))
    shape = (grid.n_points,) if size is None else (size, grid.n_points)
    return np.cumsum(rng.standard_normal(shape) * steps, axis=-1)


def brownian_bridge_path(grid: Grid, rng: np.random.Generator, size: int = None) -> np.ndarray:
    """
    布朗桥 B(τ) = W(τ) - τ·W(1)，协方差 min(τ,σ) - τσ

    W(1) 通过额外一个从最后网格点到1的增量得到。
    """
    extended = np.append(grid.points, 1.0)
    steps = np.sqrt(np.diff(extended, prepend=0.0))
    shape = (extended.size,) if size is None else (size, extended.size)
    w = np.cumsum(rng.standard_normal(shape) * steps, axis=-1)
    return w[..., :-1] - grid.points * w[..., -1:]


def innovations(kind: str, grid: Grid, rng: np.random.Generator, size: int) -> np.ndarray:
    if kind == 'bm':
        return brownian_motion_path(grid, rng, size)
    if kind == 'bb':
        return brownian_bridge_path(grid, rng, size)
    raise InvalidGeneratorError(f'未知的新息类型: {kind}')


def _kernel_shape(kind: str, grid: Grid) -> np.ndarray:
    tau = grid.points
    if kind == 'gaussian':
        return np.exp(np.add.outer(tau ** 2, tau ** 2) / 2.0)
    if kind == 'wiener':
        return np.minimum.outer(tau, tau)
    raise InvalidGeneratorError(f'未知的算子核: {kind}')


def far1_kernel(kind: str, grid: Grid, target_hs_norm: float = DEFAULT_HS_NORM) -> BivariateKernel:
    """
    FAR(1) 积分算子的核

    K_g = c_g·exp((τ²+σ²)/2)，K_w = c_w·min(τ,σ)；常数按离散 HS 范数
    √(∫∫|K|²) 归一化到 target_hs_norm。
    """
    shape = _kernel_shape(kind, grid)
    if not 0.0 <= target_hs_norm < 1.0:
        raise InvalidGeneratorError(f'HS 范数必须在 [0,1) 内: {target_hs_norm}')
    if target_hs_norm == 0.0:
        return BivariateKernel.zeros(grid)
    scale = target_hs_norm / np.sqrt(np.mean(shape ** 2))
    return BivariateKernel(grid, scale * shape, hermitian=True, real_symmetric=True)


def kernel_constant(kind: str, target_hs_norm: float = DEFAULT_HS_NORM) -> float:
    """
    连续情形下的归一化常数

    c_w = target/√(∫∫min(τ,σ)²) = target·√6
    c_g = target/√(∫∫exp(τ²+σ²)) = target/∫₀¹exp(τ²)dτ
    """
    if kind == 'wiener':
        return target_hs_norm * np.sqrt(6.0)
    if kind == 'gaussian':
        value, _ = integrate.quad(lambda t: np.exp(t * t), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        return target_hs_norm / value
    raise InvalidGeneratorError(f'未知的算子核: {kind}')


def load_generator(spec: DgpSpec):
    """
    按 kind 加载插件 app.plugins.dgp_<kind>

    Returns:
        BaseGenerator: 插件实例
    """
    try:
        module = importlib.import_module(f'app.plugins.dgp_{spec.kind}')
    except ImportError as exc:
        raise InvalidGeneratorError(f'无法加载数据生成插件 dgp_{spec.kind}: {exc}') from exc
    plugin_class = getattr(module, 'Plugin', None)
    if plugin_class is None:
        raise InvalidGeneratorError(f'插件模块 dgp_{spec.kind} 中未找到Plugin类')
    return plugin_class(config=spec.to_config())


def simulate(spec: DgpSpec, rng: np.random.Generator = None) -> FunctionalSample:
    """
    按配置生成样本

    Args:
        spec: 数据生成过程配置
        rng: 随机流；为 None 时使用 make_rng(spec.seed)

    Returns:
        FunctionalSample: burn-in 之后的 T 条曲线
    """
    rng = rng if rng is not None else make_rng(spec.seed)
    values = load_generator(spec).generate(spec.grid, spec.T, rng)
    if not np.all(np.isfinite(values)):
        raise SimulationError(f'{spec.label()} 模拟结果出现非有限值')
    return FunctionalSample(spec.grid, values)
