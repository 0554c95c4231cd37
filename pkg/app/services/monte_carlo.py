"""
蒙特卡洛实验引擎
每次重复 = 生成新样本 + 一次检验；按 (T, α) 单元汇总拒绝率、标准误、覆盖率与分布诊断

执行方式：
- threads: joblib 线程池，按重复块并行
- celery: 每个重复块一个 Celery 任务，通过 group 分发

两种方式调用同一个块函数 run_replication_block，结果按块的提交顺序归并，
因此输出与线程数、后端无关。
"""
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured
from joblib import Parallel, delayed
from scipy import stats

import app
from app.lib.core import Grid
from app.lib.exceptions import ReplicationError
from app.lib.inference import (
    H0_CONSISTENT,
    H0_NORMALIZATIONS,
    MIN_LENGTH_H1,
    MODE_CLASSICAL,
    PRECISE_MODES,
    VARIANCE_CHOICES,
    VARIANCE_H0,
    VARIANCE_H1,
    classical_rule,
    h1_sd_estimate,
    interval_from_estimates,
    m_hat_squared,
    m_tilde_squared,
    power_approximation,
    precise_rule,
    var_h0_hat,
)
from app.lib.simulate import RNG_ALGORITHM, DgpSpec, make_rng, simulate
from app.lib.spectral import fdft_table

logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1.0'

MODE_CI = 'ci'
EXPERIMENT_MODES = (MODE_CLASSICAL,) + PRECISE_MODES + (MODE_CI,)
BACKENDS = ('threads', 'celery')

# 长路径理论值的随机流下标，与单元下标不会冲突
ORACLE_STREAM = 2 ** 31 - 1


@dataclass
class Experiment:
    """
    蒙特卡洛实验配置

    Args:
        dgp: 数据生成过程模板（T 按单元替换）
        T_values: 样本长度列表
        alphas: 显著性水平列表（ci 模式下为 1 - 置信水平）
        n_reps: 每个 T 的重复次数
        mode: classical | similarity | relevant | ci
        delta: 精确假设的阈值 Δ
        variance: classical 模式的方差估计 h0 | h1-gaussian
        h0_normalization: v̂_{H0} 的归一化 consistent | four-pi
        debias: 是否使用去掉对角项的 M̂²
        seed: 主种子
        target_m0_sq: ci 模式的 M₀² 目标值；为空时用长路径上的 M̃² 计算
        oracle_T: 计算目标值的长路径长度
        oracle_p_T: 长路径 M̃² 的截断阶
        reference_rates: 参考拒绝率（百分比），键为 'T/alpha'
    """
    dgp: DgpSpec
    T_values: Sequence[int]
    alphas: Sequence[float] = (0.05,)
    n_reps: int = 500
    mode: str = MODE_CLASSICAL
    delta: Optional[float] = None
    variance: str = VARIANCE_H0
    h0_normalization: str = H0_CONSISTENT
    debias: bool = False
    seed: int = 0
    name: str = ''
    target_m0_sq: Optional[float] = None
    oracle_T: int = 2 ** 16
    oracle_p_T: int = 50
    reference_rates: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.T_values = [int(T) for T in self.T_values]
        self.alphas = [float(a) for a in self.alphas]
        if self.n_reps < 1:
            raise ValueError(f'重复次数必须 >= 1: {self.n_reps}')
        if not self.T_values:
            raise ValueError('至少需要一个样本长度')
        if not self.alphas or any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ValueError(f'显著性水平必须在 (0,1) 内: {self.alphas}')
        if self.mode not in EXPERIMENT_MODES:
            raise ValueError(f'未知的实验模式: {self.mode}')
        if self.mode in PRECISE_MODES:
            if self.delta is None or self.delta < 0:
                raise ValueError(f'{self.mode} 模式需要非负的 Δ')
        if self.variance not in VARIANCE_CHOICES:
            raise ValueError(f'未知的方差估计: {self.variance}')
        if self.h0_normalization not in H0_NORMALIZATIONS:
            raise ValueError(f'未知的 v̂_H0 归一化: {self.h0_normalization}')
        min_T = MIN_LENGTH_H1 if self._needs_h1 else 4
        short = [T for T in self.T_values if T < min_T]
        if short:
            raise ValueError(f'样本长度过短 (需要 >= {min_T}): {short}')
        if not self.name:
            self.name = f'{self.dgp.label()}-{self.mode}'

    @property
    def _needs_h1(self) -> bool:
        return self.mode != MODE_CLASSICAL or self.variance == VARIANCE_H1

    def cell_key(self, T: int, alpha: float = None) -> str:
        key = f'{self.dgp.label()}/T={T}'
        return key if alpha is None else f'{key}/alpha={alpha:g}'

    def to_dict(self) -> Dict[str, Any]:
        """可 JSON 序列化的配置（Celery 任务参数、报告元数据）"""
        data = asdict(self)
        data['dgp'] = self.dgp.to_config()
        data['dgp']['grid_points'] = self.dgp.grid.points.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Experiment':
        data = dict(data)
        dgp = dict(data.pop('dgp'))
        points = dgp.pop('grid_points', None)
        grid = Grid(points) if points is not None else Grid.midpoint(dgp['grid_size'])
        for key in ('grid_size', 'rng'):
            dgp.pop(key, None)
        return cls(dgp=DgpSpec(grid=grid, **dgp), **data)


@dataclass
class ExperimentCell:
    """单个 (T, α) 单元的汇总"""
    key: str
    T: int
    alpha: float
    n: int
    rejections: int
    rejection_rate: float
    standard_error: float
    seed: int
    mean_m_hat_sq: float
    mean_v_h0: float
    mean_v_h1: Optional[float] = None
    predicted_power: Optional[float] = None
    coverage: Optional[float] = None
    reference_rate: Optional[float] = None
    z_summary: Optional[Dict[str, float]] = None
    h1_clipped: int = 0
    wall_time: float = 0.0


@dataclass
class ExperimentResult:
    name: str
    mode: str
    cells: List[ExperimentCell]
    experiment: Dict[str, Any]
    environment: Dict[str, Any]
    wall_time: float
    target_m0_sq: Optional[float] = None
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def cell(self, T: int, alpha: float) -> ExperimentCell:
        for c in self.cells:
            if c.T == T and math.isclose(c.alpha, alpha):
                return c
        raise KeyError(f'不存在单元 T={T}, alpha={alpha}')


def _replicate(experiment: Experiment, T: int, cell_index: int, replication: int) -> Dict[str, Any]:
    """
    单次重复：模拟 + 检验统计量 + 各 α 下的判决

    v̂²_{H1} 估计为负（截断为0）时，需要 v̂_{H1} 标准化的判决记为不拒绝，
    并在记录中标记 h1_clipped；四项全为0的真正退化样本仍然报错。
    """
    rng = make_rng(experiment.seed, cell_index, replication)
    sample = simulate(experiment.dgp.with_length(T), rng)
    table = fdft_table(sample)
    m_hat = m_hat_squared(sample, table, debias=experiment.debias)
    v_h0 = var_h0_hat(sample, table, normalization=experiment.h0_normalization)
    v_h1, clipped = h1_sd_estimate(sample, table)
    uses_h1 = experiment.mode in PRECISE_MODES or (
        experiment.mode == MODE_CLASSICAL and experiment.variance == VARIANCE_H1)

    rejects = []
    z = None
    for alpha in experiment.alphas:
        if clipped and uses_h1:
            reject = False
        elif experiment.mode == MODE_CLASSICAL:
            v = v_h0 if experiment.variance == VARIANCE_H0 else v_h1
            z, _, _, reject = classical_rule(m_hat, v, T, alpha)
        elif experiment.mode == MODE_CI:
            lower, upper = interval_from_estimates(m_hat, v_h1, T, alpha)
            reject = not lower <= experiment.target_m0_sq <= upper
        else:
            z, _, _, reject = precise_rule(m_hat, experiment.delta, v_h1, T, alpha, experiment.mode)
        rejects.append(bool(reject))
    if experiment.mode == MODE_CI and v_h0 > 0:
        z = math.sqrt(T) * m_hat / v_h0
    return {
        'replication': replication,
        'm_hat_sq': m_hat,
        'v_h0': v_h0,
        'v_h1': v_h1,
        'h1_clipped': clipped,
        'z': z,
        'rejects': rejects,
    }



def run_replication_block(experiment_data: Dict[str, Any], cell_index: int,
                          start: int, stop: int) -> Dict[str, Any]:
    """
    执行一个重复块 [start, stop)

    本地线程池和 Celery 任务共用此函数。单次重复失败不会中断整个块，
    失败信息记录在 errors 中，由调用方决定是否中止单元。

    Args:
        experiment_data: Experiment.to_dict() 的结果
        cell_index: T_values 中的下标（随机流的第一个派生键）
        start: 起始重复下标（含）
        stop: 结束重复下标（不含）

    Returns:
        Dict: {'cell_index', 'start', 'records', 'errors', 'elapsed'}
    """
    experiment = Experiment.from_dict(experiment_data)
    T = experiment.T_values[cell_index]
    key = experiment.cell_key(T)
    started = time.perf_counter()
    records, errors = [], []
    for replication in range(start, stop):
        try:
            records.append(_replicate(experiment, T, cell_index, replication))
        except (ValueError, ArithmeticError) as exc:
            logger.error(f'重复失败: cell={key}, replication={replication}: {exc}', exc_info=True)
            errors.append({
                'cell': key,
                'replication': replication,
                'error_type': type(exc).__name__,
                'message': str(exc),
            })
    return {
        'cell_index': cell_index,
        'start': start,
        'records': records,
        'errors': errors,
        'elapsed': time.perf_counter() - started,
    }


def _blocks(experiment: Experiment, block_size: int) -> List[Tuple[int, int, int]]:
    block_size = max(int(block_size), 1)
    return [
        (cell_index, start, min(start + block_size, experiment.n_reps))
        for cell_index in range(len(experiment.T_values))
        for start in range(0, experiment.n_reps, block_size)
    ]


def _dispatch(experiment: Experiment, threads: int, backend: str, block_size: int) -> List[Dict[str, Any]]:
    """把全部重复块分发到本地线程池或 Celery，返回按提交顺序排列的块结果"""
    data = experiment.to_dict()
    blocks = _blocks(experiment, block_size)
    if backend == 'threads':
        return Parallel(n_jobs=max(int(threads), 1), backend='threading')(
            delayed(run_replication_block)(data, cell_index, start, stop)
            for cell_index, start, stop in blocks
        )
    if backend == 'celery':
        from app.tasks import run_replication_block_task
        if run_replication_block_task is None:
            raise ImproperlyConfigured('Celery 未安装，无法使用 celery 后端')
        from celery import group
        job = group(
            run_replication_block_task.s(data, cell_index, start, stop)
            for cell_index, start, stop in blocks
        )
        logger.info(f'已提交 {len(blocks)} 个重复块到 Celery')
        return job.apply_async().get()
    raise ValueError(f'未知的并行后端: {backend}，可选 {", ".join(BACKENDS)}')


def _collect(experiment: Experiment, block_results) -> Dict[int, Dict[str, Any]]:
    """按单元归并块结果；记录按重复下标排序"""
    by_cell = {i: {'records': [], 'errors': [], 'elapsed': 0.0} for i in range(len(experiment.T_values))}
    for block in block_results:
        cell = by_cell[block['cell_index']]
        cell['records'].extend(block['records'])
        cell['errors'].extend(block['errors'])
        cell['elapsed'] += block['elapsed']
    for cell in by_cell.values():
        cell['records'].sort(key=lambda r: r['replication'])
        cell['errors'].sort(key=lambda e: e['replication'])
    return by_cell


def z_summary(z_values) -> Optional[Dict[str, float]]:
    """z 样本的均值、方差以及与 N(0,1) 的 KS 距离"""
    z = np.asarray([v for v in z_values if v is not None], dtype=float)
    if z.size < 2:
        return None
    ks = stats.kstest(z, 'norm')
    return {
        'mean': float(z.mean()),
        'var': float(z.var(ddof=1)),
        'ks_statistic': float(ks.statistic),
        'ks_pvalue': float(ks.pvalue),
    }


def _mean(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def _aggregate(experiment: Experiment, cell_index: int, collected: Dict[str, Any]) -> List[ExperimentCell]:
    T = experiment.T_values[cell_index]
    records = collected['records']
    n = len(records)
    mean_m_hat = _mean(r['m_hat_sq'] for r in records)
    mean_v_h0 = _mean(r['v_h0'] for r in records)
    mean_v_h1 = _mean(r['v_h1'] for r in records)
    summary = z_summary(r['z'] for r in records)
    clipped = sum(1 for r in records if r.get('h1_clipped'))

    cells = []
    for j, alpha in enumerate(experiment.alphas):
        rejections = sum(1 for r in records if r['rejects'][j])
        rate = rejections / n
        predicted = None
        if experiment.mode == MODE_CLASSICAL and mean_v_h1:
            v = mean_v_h0 if experiment.variance == VARIANCE_H0 else mean_v_h1
            predicted = power_approximation(T, max(mean_m_hat, 0.0), v, mean_v_h1, alpha).power
        cells.append(ExperimentCell(
            key=experiment.cell_key(T, alpha),
            T=T,
            alpha=alpha,
            n=n,
            rejections=rejections,
            rejection_rate=rate,
            standard_error=math.sqrt(rate * (1.0 - rate) / n),
            seed=experiment.seed,
            mean_m_hat_sq=mean_m_hat,
            mean_v_h0=mean_v_h0,
            mean_v_h1=mean_v_h1,
            predicted_power=predicted,
            coverage=1.0 - rate if experiment.mode == MODE_CI else None,
            reference_rate=experiment.reference_rates.get(f'{T}/{alpha:g}'),
            z_summary=summary,
            h1_clipped=clipped,
            wall_time=collected['elapsed'],
        ))
    return cells


def environment_metadata(threads: int, backend: str) -> Dict[str, Any]:
    return {
        'library_version': app.__version__,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'platform': platform.platform(),
        'rng': RNG_ALGORITHM,
        'threads': threads,
        'backend': backend,
    }


def _public_config(experiment: Experiment) -> Dict[str, Any]:
    """报告中的实验配置，不含网格点列表"""
    data = experiment.to_dict()
    data['dgp'].pop('grid_points', None)
    return data


def oracle_m0_sq(experiment: Experiment) -> float:
    """在一条长路径上用时域估计 M̃² 近似 M₀²"""
    spec = experiment.dgp.with_length(experiment.oracle_T)
    logger.info(f'计算长路径理论值: {spec.label()}, T={spec.T}, p_T={experiment.oracle_p_T}')
    sample = simulate(spec, make_rng(experiment.seed, ORACLE_STREAM))
    return m_tilde_squared(sample, experiment.oracle_p_T)


def run(experiment: Experiment, threads: int = None, backend: str = None, block_size: int = None) -> ExperimentResult:
    """
    执行实验

    Args:
        experiment: 实验配置
        threads: 本地线程数，默认 settings.FWN_THREADS
        backend: threads | celery，默认 settings.FWN_PARALLEL_BACKEND
        block_size: 每个任务的重复数，默认 settings.FWN_BLOCK_SIZE

    Returns:
        ExperimentResult

    Raises:
        ReplicationError: 任一重复失败时中止，携带单元和重复下标
    """
    threads = threads or getattr(settings, 'FWN_THREADS', 1)
    backend = backend or getattr(settings, 'FWN_PARALLEL_BACKEND', 'threads')
    block_size = block_size or getattr(settings, 'FWN_BLOCK_SIZE', 25)

    started = time.perf_counter()
    if experiment.mode == MODE_CI and experiment.target_m0_sq is None:
        experiment = replace(experiment, target_m0_sq=oracle_m0_sq(experiment))

    logger.info(f'开始实验 {experiment.name}: T={experiment.T_values}, alpha={experiment.alphas}, '
                f'reps={experiment.n_reps}, backend={backend}, threads={threads}')
    collected = _collect(experiment, _dispatch(experiment, threads, backend, block_size))

    cells = []
    for cell_index, T in enumerate(experiment.T_values):
        errors = collected[cell_index]['errors']
        if errors:
            first = errors[0]
            raise ReplicationError(
                f'单元 {first["cell"]} 第 {first["replication"]} 次重复失败 '
                f'({first["error_type"]}: {first["message"]})，共 {len(errors)} 次失败',
                cell=first['cell'], replication=first['replication'],
            )
        cell_rows = _aggregate(experiment, cell_index, collected[cell_index])
        if cell_rows and cell_rows[0].h1_clipped:
            logger.warning(f'单元 {experiment.cell_key(T)}: {cell_rows[0].h1_clipped} 次重复的 v̂²_H1 估计为负，'
                           f'按不拒绝计入')
        for cell in cell_rows:
            logger.info(f'单元 {cell.key}: 拒绝率={cell.rejection_rate:.4f} ± {cell.standard_error:.4f}, '
                        f'n={cell.n}, 用时={cell.wall_time:.2f}s')
        cells.extend(cell_rows)

    return ExperimentResult(
        name=experiment.name,
        mode=experiment.mode,
        cells=cells,
        experiment=_public_config(experiment),
        environment=environment_metadata(threads, backend),
        wall_time=time.perf_counter() - started,
        target_m0_sq=experiment.target_m0_sq,
    )


def null_distribution_diagnostic(experiment: Experiment, threads: int = None, backend: str = None,
                                 block_size: int = None) -> Dict[str, Any]:
    """
    原假设下 z = √T·M̂²/v̂_{H0} 的分布诊断

    对每个 T 报告 z 与 N(0,1) 的 KS 距离，以及方差比
    Var_emp(√T·M̂²) / mean(v̂²_{H0})。失败的重复不会中止诊断，
    而是以结构化列表的形式返回。

    Returns:
        Dict: {'cells': [...], 'errors': [...]}
    """
    if experiment.mode != MODE_CLASSICAL:
        raise ValueError('分布诊断只适用于 classical 模式')
    threads = threads or getattr(settings, 'FWN_THREADS', 1)
    backend = backend or getattr(settings, 'FWN_PARALLEL_BACKEND', 'threads')
    block_size = block_size or getattr(settings, 'FWN_BLOCK_SIZE', 25)

    collected = _collect(experiment, _dispatch(experiment, threads, backend, block_size))
    cells, errors = [], []
    for cell_index, T in enumerate(experiment.T_values):
        records = collected[cell_index]['records']
        errors.extend(collected[cell_index]['errors'])
        scaled = np.array([math.sqrt(T) * r['m_hat_sq'] for r in records])
        v_sq = np.array([r['v_h0'] ** 2 for r in records])
        ratio = None
        if scaled.size >= 2 and v_sq.mean() > 0:
            ratio = float(scaled.var(ddof=1) / v_sq.mean())
        cells.append({
            'key': experiment.cell_key(T),
            'T': T,
            'n': len(records),
            'z_summary': z_summary(r['z'] for r in records),
            'variance_ratio': ratio,
        })
    return {
        'name': experiment.name,
        'cells': cells,
        'errors': errors,
        'schema_version': SCHEMA_VERSION,
        'environment': environment_metadata(threads, backend),
    }
