"""
检验与推断
距离估计 M̂²、方差估计 v̂_{H0} / v̂_{H1}（高斯情形）、经典白噪声检验、
精确假设检验（相关偏离 / 相似性）、置信区间、功效近似以及时域估计 M̃²。
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import stats

from app.lib.core import FunctionalSample, autocov_kernel
from app.lib.exceptions import DegenerateDataError, InsufficientSampleError
from app.lib.spectral import (
    MIN_LENGTH,
    FdftTable,
    fdft_table,
    lag_one_products,
    m_hat_fast,
    require_length,
    s1_matrix,
)

logger = logging.getLogger(__name__)

# v̂_{H1} 第一项需要 k, k-1, k-2, k-3 四个不同频率
MIN_LENGTH_H1 = 8

MODE_CLASSICAL = 'classical'
MODE_RELEVANT = 'relevant'
MODE_SIMILARITY = 'similarity'
PRECISE_MODES = (MODE_RELEVANT, MODE_SIMILARITY)

VARIANCE_H0 = 'h0'
VARIANCE_H1 = 'h1-gaussian'
VARIANCE_CHOICES = (VARIANCE_H0, VARIANCE_H1)

# v̂_{H0} 的归一化常数乘在 ∫∫ S_{T,2} 前。consistent 与 v²_{H0} 的闭式一致，
# 白噪声下 Var(√T·M̂²/v̂_{H0}) → 1；four-pi 的 z 方差约为 1/2，检验偏保守
H0_CONSISTENT = 'consistent'
H0_FOUR_PI = 'four-pi'
H0_NORMALIZATIONS = {
    H0_CONSISTENT: 2.0 * math.sqrt(2.0) * math.pi,
    H0_FOUR_PI: 4.0 * math.pi,
}


@dataclass
class TestReport:
    """单次检验的结果"""
    m_hat_sq: float
    v_h0: float
    T: int
    z: float
    p_value: float
    alpha: float
    decision: str
    mode: str
    critical_value: float
    variance: str = VARIANCE_H0
    v_h1: Optional[float] = None
    delta: Optional[float] = None
    ci: Optional[Tuple[float, float]] = None
    m_tilde_sq: Optional[float] = None
    p_T: Optional[int] = None
    power_plugin: Optional[float] = None
    non_gaussian_warning: bool = False
    h0_normalization: str = H0_CONSISTENT
    debiased: bool = False
    h1_clipped: bool = False
    metadata: Dict = field(default_factory=dict)

    # 避免被 unittest 收集为测试类
    __test__ = False

    @property
    def rejected(self) -> bool:
        return self.decision == 'reject'

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['ci'] = list(self.ci) if self.ci is not None else None
        return data


@dataclass
class PowerEstimate:
    T: int
    M0_sq: float
    v_h0: float
    v_h1: float
    alpha: float
    power: float


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f'显著性水平必须在 (0,1) 内: {alpha}')


def normal_quantile(p: float) -> float:
    """标准正态分位数 u_p"""
    return float(stats.norm.ppf(p))


def default_p_T(T: int) -> int:
    """时域估计的默认截断 ⌈T^{1/3}⌉，并限制在 [1, T-1]"""
    return int(min(max(math.ceil(T ** (1.0 / 3.0) - 1e-12), 1), T - 1))


def _table(x: FunctionalSample, table: Optional[FdftTable]) -> FdftTable:
    return table if table is not None else fdft_table(x)


def m_hat_squared(x: FunctionalSample, table: FdftTable = None, method: str = 'auto',
                  debias: bool = False) -> float:
    """
    距离估计 M̂²_T = 2π ∫∫ (S_{T,2} - S_{T,1}·conj S_{T,1})

    通过快速路径计算，不构造 G×G 周期图核。debias=True 时去掉 S_{T,1} 平方中
    同一频率自乘的项，白噪声下的 O(1/T) 负偏差随之消失。
    """
    require_length(x, MIN_LENGTH, 'M̂²')
    a2, a1 = m_hat_fast(_table(x, table), method=method, debias=debias)
    return 2.0 * np.pi * (a2 - a1)


def var_h0_hat(x: FunctionalSample, table: FdftTable = None, normalization: str = H0_CONSISTENT) -> float:
    """
    原假设下的标准差估计 v̂_{H0} = c·∫∫ S_{T,2}（O(T·G)）

    Args:
        normalization: 'consistent'（c = 2√2·π，默认）或 'four-pi'（c = 4π）
    """
    if normalization not in H0_NORMALIZATIONS:
        raise ValueError(f'未知的 v̂_H0 归一化: {normalization}')
    require_length(x, MIN_LENGTH, 'v̂_{H0}')
    table = _table(x, table)
    products = lag_one_products(table)
    a2 = 2.0 * float(np.sum(np.abs(products[2:]) ** 2)) / table.T
    return H0_NORMALIZATIONS[normalization] * a2


def variance_terms(x: FunctionalSample, table: FdftTable = None) -> Dict[str, float]:
    """
    v² 中只含二阶谱的四项的周期图估计

    每个二阶谱因子换成与当前频率下标相差不同偏移（k, k-1, k-2, ...）的周期图，
    每一维频率积分取 Riemann 权重 2π/T，并对半频率范围乘2。秩一结构使每个求和项
    化为 fDFT 曲线内积的乘积：

    - chain4:       16π ∫ tr(F_ω⁴) dω
    - squared_norm: 4π ∫ (∫∫|f_ω|²)² dω
    - cross3:       -16 ∫∫ tr(F_{ω1} F_{ω2}³) dω1 dω2
    - cross_pair:   (4/π) ∫∫∫ f_{ω1}(τ1,σ1) f_{ω2}(τ2,σ2) f_{ω3}(τ1,σ2) f_{ω3}(τ2,σ1)

    单独的频率积分 ∫ f_ω dω 用 2π·S_{T,1} 估计。总代价 O(T·G + T·G²)。
    """
    if x.T < MIN_LENGTH_H1:
        raise InsufficientSampleError(f'v̂_{{H1}} 需要 T >= {MIN_LENGTH_H1}，当前 T = {x.T}')
    table = _table(x, table)
    T = table.T
    K = table.n_frequencies
    curves = table.curves
    n = table.grid.n_points
    # c[k] = ⟨X̃_{k-1}, X̃_k⟩
    c = lag_one_products(table)

    k = np.arange(4, K + 1)
    d = np.mean(curves[k] * curves[k - 3].conj(), axis=1)
    chain4 = 64.0 * np.pi ** 2 / T * float(np.sum(c[k] * c[k - 1] * c[k - 2] * d).real)
    squared_norm = 16.0 * np.pi ** 2 / T * float(np.sum(np.abs(c[k]) ** 2 * np.abs(c[k - 2]) ** 2))

    # A = 2π S_{T,1} 估计 ∫ f_ω dω，实对称
    a = 2.0 * np.pi * s1_matrix(table)
    a_curves = curves @ a

    k = np.arange(3, K + 1)
    q = np.sum(curves[k - 2].conj() * a_curves[k], axis=1) / n ** 2
    cross3 = -64.0 * np.pi / T * float(np.sum(c[k] * c[k - 1] * q).real)

    k = np.arange(2, K + 1)
    u = np.sum(curves[k] * a_curves[k - 1].conj(), axis=1) / n ** 2
    cross_pair = 16.0 / T * float(np.sum(np.abs(u) ** 2))

    return {
        'chain4': chain4,
        'squared_norm': squared_norm,
        'cross3': cross3,
        'cross_pair': cross_pair,
    }


def var_h1_hat_gaussian(x: FunctionalSample, table: FdftTable = None) -> float:
    """
    备择假设下方差 v² 的估计（高斯情形）

    省略含四阶累积量谱的三项（高斯过程下为0），负值截断为0。

    Returns:
        float: 方差估计 v̂²_{H1}（标准差为其平方根）
    """
    terms = variance_terms(x, table)
    total = sum(terms.values())
    if total < 0:
        logger.debug(f'v̂²_H1 估计为负 ({total:.3e})，截断为0: {terms}')
    return max(total, 0.0)


def h1_standard_deviation(x: FunctionalSample, table: FdftTable = None) -> float:
    """
    标准化用的 v̂_{H1}，估计不可用时抛出异常

    Raises:
        DegenerateDataError: clipped=True 表示 v̂²_{H1} 估计为负。小 T 下白噪声
            也会出现（T=256、G=50 的独立布朗运动约 13%），不代表数据退化；
            clipped=False 表示四项全为0（如常数样本）
    """
    terms = variance_terms(x, table)
    total = sum(terms.values())
    if total > 0:
        return math.sqrt(total)
    if total < 0:
        raise DegenerateDataError(
            f'v̂²_H1 估计为负 ({total:.3e})，被截断为0；T={x.T} 较小时白噪声也会出现，'
            f'可改用 v̂_H0 标准化的经典检验或增大 T',
            clipped=True,
        )
    raise DegenerateDataError('v̂_H1 = 0，数据退化（如常数样本），无法标准化')


def classical_rule(m_hat_sq: float, v: float, T: int, alpha: float):
    """
    经典检验的判决规则：M̂² > (v/√T)·u_{1-α} 时拒绝

    Returns:
        tuple: (z, p_value, critical_value, reject)
    """
    _check_alpha(alpha)
    if not v > 0:
        raise DegenerateDataError(f'方差估计为 {v}，数据退化（如常数样本），无法标准化')
    z = math.sqrt(T) * m_hat_sq / v
    critical = normal_quantile(1.0 - alpha)
    return z, float(stats.norm.sf(z)), critical, z > critical


def precise_rule(m_hat_sq: float, delta: float, v_h1: float, T: int, alpha: float, mode: str):
    """
    精确假设检验的判决规则

    - similarity: M̂² - Δ < (v̂_{H1}/√T)·u_α 时拒绝 H: M² >= Δ（宣布与白噪声相似）
    - relevant:   M̂² - Δ > (v̂_{H1}/√T)·u_{1-α} 时拒绝 H: M² <= Δ（宣布相关偏离）

    Returns:
        tuple: (z, p_value, critical_value, reject)
    """
    _check_alpha(alpha)
    if delta < 0:
        raise ValueError(f'阈值 Δ 必须非负: {delta}')
    if mode not in PRECISE_MODES:
        raise ValueError(f'未知的精确假设模式: {mode}')
    if not v_h1 > 0:
        raise DegenerateDataError(f'v̂_H1 = {v_h1}，数据退化，无法标准化')
    z = math.sqrt(T) * (m_hat_sq - delta) / v_h1
    if mode == MODE_SIMILARITY:
        critical = normal_quantile(alpha)
        return z, float(stats.norm.cdf(z)), critical, z < critical
    critical = normal_quantile(1.0 - alpha)
    return z, float(stats.norm.sf(z)), critical, z > critical


def interval_from_estimates(m_hat_sq: float, v_h1: float, T: int, alpha: float) -> Tuple[float, float]:
    """[max{0, M̂² - (v̂/√T)u_{1-α/2}}, M̂² + (v̂/√T)u_{1-α/2}]"""
    _check_alpha(alpha)
    if v_h1 < 0:
        raise ValueError(f'标准差估计不能为负: {v_h1}')
    half_width = v_h1 / math.sqrt(T) * normal_quantile(1.0 - alpha / 2.0)
    return max(0.0, m_hat_sq - half_width), m_hat_sq + half_width


def power_approximation(T: int, M0_sq: float, v_h0: float, v_h1: float, alpha: float) -> PowerEstimate:
    """
    经典检验的近似功效

    P(reject) ≈ Φ(√T·M₀²/v_{H1} - (v_{H0}/v_{H1})·u_{1-α})
    """
    _check_alpha(alpha)
    if not v_h1 > 0:
        raise ValueError(f'v_H1 必须为正: {v_h1}')
    if v_h0 < 0:
        raise ValueError(f'v_H0 不能为负: {v_h0}')
    argument = math.sqrt(T) * M0_sq / v_h1 - (v_h0 / v_h1) * normal_quantile(1.0 - alpha)
    return PowerEstimate(T=T, M0_sq=M0_sq, v_h0=v_h0, v_h1=v_h1, alpha=alpha,
                         power=float(stats.norm.cdf(argument)))


def m_tilde_squared(x: FunctionalSample, p_T: int = None) -> float:
    """
    时域距离估计 M̃² = (1/π) Σ_{t=1}^{p_T} ‖r̂_t‖₂²

    Args:
        p_T: 截断阶，1 <= p_T <= T-1，默认 ⌈T^{1/3}⌉
    """
    if x.T < 2:
        raise InsufficientSampleError('M̃² 需要 T >= 2')
    p_T = default_p_T(x.T) if p_T is None else p_T
    if not 1 <= p_T <= x.T - 1:
        raise ValueError(f'截断阶 p_T={p_T} 超出范围 [1, {x.T - 1}]')
    total = 0.0
    for lag in range(1, p_T + 1):
        total += autocov_kernel(x, lag).hs_norm_sq()
    return total / np.pi


def h1_sd_estimate(x: FunctionalSample, table: FdftTable) -> Tuple[Optional[float], bool]:
    """报告用的 v̂_{H1} 及其是否被截断；T 不足时为 (None, False)"""
    if x.T < MIN_LENGTH_H1:
        return None, False
    total = sum(variance_terms(x, table).values())
    return math.sqrt(max(total, 0.0)), total < 0


def classical_test(x: FunctionalSample, alpha: float = 0.05, variance: str = VARIANCE_H0,
                   p_T: int = None, with_oracle: bool = True, h0_normalization: str = H0_CONSISTENT,
                   debias: bool = False) -> TestReport:
    """
    经典白噪声检验：M̂² > (v̂/√T)·u_{1-α} 时拒绝原假设

    Args:
        x: 样本（T >= 4；使用 h1-gaussian 方差时 T >= 8）
        alpha: 显著性水平
        variance: 标准化所用的方差估计，'h0'（默认）或 'h1-gaussian'
        p_T: 附带报告的时域估计 M̃² 的截断阶
        with_oracle: 是否附带计算 M̃²
        h0_normalization: v̂_{H0} 的归一化，见 H0_NORMALIZATIONS
        debias: 是否使用去掉对角项的 M̂²

    Returns:
        TestReport

    Raises:
        DegenerateDataError: 方差估计为0（h1-gaussian 下估计为负时 clipped=True）
    """
    _check_alpha(alpha)
    if variance not in VARIANCE_CHOICES:
        raise ValueError(f'未知的方差估计: {variance}')
    require_length(x, MIN_LENGTH_H1 if variance == VARIANCE_H1 else MIN_LENGTH, '经典检验')
    table = fdft_table(x)
    m_hat = m_hat_squared(x, table, debias=debias)
    v_h0 = var_h0_hat(x, table, normalization=h0_normalization)
    if variance == VARIANCE_H1:
        v_h1, clipped = h1_standard_deviation(x, table), False
        v = v_h1
    else:
        v_h1, clipped = h1_sd_estimate(x, table)
        v = v_h0
    z, p_value, critical, reject = classical_rule(m_hat, v, x.T, alpha)

    report = TestReport(
        m_hat_sq=m_hat, v_h0=v_h0, v_h1=v_h1, T=x.T, z=z, p_value=p_value, alpha=alpha,
        decision='reject' if reject else 'retain', mode=MODE_CLASSICAL,
        critical_value=critical, variance=variance,
        non_gaussian_warning=variance == VARIANCE_H1,
        h0_normalization=h0_normalization, debiased=debias, h1_clipped=clipped,
    )
    _attach_extras(report, x, p_T, with_oracle)
    logger.debug(f'经典检验: T={x.T}, M̂²={m_hat:.6g}, z={z:.4f}, 判决={report.decision}')
    return report


def precise_test(x: FunctionalSample, delta: float, alpha: float = 0.05, mode: str = MODE_SIMILARITY,
                 p_T: int = None, with_oracle: bool = True, h0_normalization: str = H0_CONSISTENT,
                 debias: bool = False) -> TestReport:
    """
    精确假设检验

    relevant:   H: M₀² <= Δ vs K: M₀² > Δ
    similarity: H: M₀² >= Δ vs K: M₀² < Δ

    Δ = 0 的 relevant 模式即用 v̂_{H1} 标准化的经典单侧规则。
    """
    require_length(x, MIN_LENGTH_H1, '精确假设检验')
    table = fdft_table(x)
    m_hat = m_hat_squared(x, table, debias=debias)
    v_h0 = var_h0_hat(x, table, normalization=h0_normalization)
    v_h1 = h1_standard_deviation(x, table)
    z, p_value, critical, reject = precise_rule(m_hat, delta, v_h1, x.T, alpha, mode)
    report = TestReport(
        m_hat_sq=m_hat, v_h0=v_h0, v_h1=v_h1, T=x.T, z=z, p_value=p_value, alpha=alpha,
        decision='reject' if reject else 'retain', mode=mode, delta=delta,
        critical_value=critical, variance=VARIANCE_H1, non_gaussian_warning=True,
        h0_normalization=h0_normalization, debiased=debias,
    )
    _attach_extras(report, x, p_T, with_oracle)
    return report


def confidence_interval(x: FunctionalSample, alpha: float = 0.05, debias: bool = False) -> Tuple[float, float]:
    """M₀² 的渐近 (1-α) 置信区间，下界截断在0"""
    require_length(x, MIN_LENGTH_H1, '置信区间')
    table = fdft_table(x)
    v_h1 = h1_standard_deviation(x, table)
    return interval_from_estimates(m_hat_squared(x, table, debias=debias), v_h1, x.T, alpha)


def _attach_extras(report: TestReport, x: FunctionalSample, p_T: Optional[int], with_oracle: bool):
    """置信区间、插入式功效近似、时域估计"""
    if report.v_h1:
        report.ci = interval_from_estimates(report.m_hat_sq, report.v_h1, report.T, report.alpha)
        report.power_plugin = power_approximation(
            report.T, max(report.m_hat_sq, 0.0), report.v_h0, report.v_h1, report.alpha
        ).power
    if with_oracle and x.T >= 2:
        report.p_T = default_p_T(x.T) if p_T is None else p_T
        report.m_tilde_sq = m_tilde_squared(x, report.p_T)
