"""
基础数值结构
网格、曲线/核容器、求积、内积以及时域自协方差核估计

所有容器在构造后只读（底层数组 write=False），可以在线程间共享。
积分一律用网格点平均近似（区间长度为1）。
"""
import logging
from dataclasses import dataclass

import numpy as np

from app.lib.exceptions import GridMismatchError, SampleFormatError

logger = logging.getLogger(__name__)

# 对称/共轭对称断言的相对容差
SYMMETRY_RTOL = 1e-10


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid:
    """
    [0,1] 上的等距网格

    默认使用中点网格 τ_j = (j + 1/2)/G，也可以用端点网格 j/(G-1)。
    """
    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points, float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError(f'网格至少需要2个点，当前形状: {pts.shape}')
        if not np.all(np.isfinite(pts)) or pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError('网格点必须位于 [0,1] 内')
        if not np.all(np.diff(pts) > 0):
            raise ValueError('网格点必须严格递增')
        object.__setattr__(self, 'points', pts)

    @classmethod
    def midpoint(cls, n_points: int) -> 'Grid':
        if n_points < 2:
            raise ValueError(f'网格点数必须 >= 2: {n_points}')
        return cls((np.arange(n_points) + 0.5) / n_points)

    @classmethod
    def endpoint(cls, n_points: int) -> 'Grid':
        if n_points < 2:
            raise ValueError(f'网格点数必须 >= 2: {n_points}')
        return cls(np.linspace(0.0, 1.0, n_points))

    @property
    def n_points(self) -> int:
        return int(self.points.size)

    def __len__(self):
        return self.n_points

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)

    __hash__ = None


def _check_same_grid(a_grid: Grid, b_grid: Grid):
    if a_grid is not b_grid and a_grid != b_grid:
        raise GridMismatchError(
            f'网格不一致: {a_grid.n_points} 个点 vs {b_grid.n_points} 个点'
        )


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """
    观测到的泛函时间序列 X_0, ..., X_{T-1}

    values 为 T×G 实矩阵，第 t 行是曲线 X_t 在网格上的取值。
    """
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values, float)
        if vals.ndim != 2:
            raise SampleFormatError(f'样本必须是 T×G 矩阵，当前维度: {vals.ndim}')
        if vals.shape[0] < 1:
            raise SampleFormatError('样本至少需要一条曲线')
        if vals.shape[1] != self.grid.n_points:
            raise GridMismatchError(
                f'样本列数 {vals.shape[1]} 与网格点数 {self.grid.n_points} 不一致'
            )
        bad = np.argwhere(~np.isfinite(vals))
        if bad.size:
            row, column = (int(i) for i in bad[0])
            raise SampleFormatError(f'第 {row} 行第 {column} 列不是有限数值', row=row, column=column)
        object.__setattr__(self, 'values', vals)

    @classmethod
    def from_array(cls, values, grid: Grid = None) -> 'FunctionalSample':
        """按列数构造中点网格（未指定网格时）"""
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 2:
            raise SampleFormatError(f'样本必须是 T×G 矩阵，当前维度: {arr.ndim}')
        return cls(grid or Grid.midpoint(arr.shape[1]), arr)

    @property
    def T(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    def scaled(self, factor: float) -> 'FunctionalSample':
        return FunctionalSample(self.grid, self.values * factor)

    def time_reversed(self) -> 'FunctionalSample':
        return FunctionalSample(self.grid, self.values[::-1])


@dataclass(frozen=True, eq=False)
class ComplexCurve:
    """网格上的一条复值曲线（fDFT 的输出）"""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values, complex)
        if vals.shape != (self.grid.n_points,):
            raise GridMismatchError(f'曲线长度 {vals.shape} 与网格点数 {self.grid.n_points} 不一致')
        if not np.all(np.isfinite(vals)):
            raise ValueError('曲线含有非有限值')
        object.__setattr__(self, 'values', vals)

    @classmethod
    def from_real(cls, grid: Grid, values) -> 'ComplexCurve':
        return cls(grid, np.asarray(values, dtype=float).astype(complex))


@dataclass(frozen=True, eq=False)
class BivariateKernel:
    """
    [0,1]² 上的复值核 k(τ,σ)，以 G×G 稠密矩阵存储

    Args:
        hermitian: 置位时断言 k(τ,σ) = conj(k(σ,τ))
        real_symmetric: 置位时断言核为实对称
    """
    grid: Grid
    values: np.ndarray
    hermitian: bool = False
    real_symmetric: bool = False

    def __post_init__(self):
        vals = _frozen(self.values, complex)
        n = self.grid.n_points
        if vals.shape != (n, n):
            raise GridMismatchError(f'核形状 {vals.shape} 与网格 {n}×{n} 不一致')
        if not np.all(np.isfinite(vals)):
            raise ValueError('核含有非有限值')
        scale = SYMMETRY_RTOL * (1.0 + float(np.max(np.abs(vals))))
        if self.hermitian and np.max(np.abs(vals - vals.conj().T)) > scale:
            raise ValueError('核不满足共轭对称 k(τ,σ)=conj(k(σ,τ))')
        if self.real_symmetric:
            if np.max(np.abs(vals.imag)) > scale:
                raise ValueError('核不是实值')
            if np.max(np.abs(vals - vals.T)) > scale:
                raise ValueError('核不对称')
        object.__setattr__(self, 'values', vals)

    @classmethod
    def zeros(cls, grid: Grid) -> 'BivariateKernel':
        n = grid.n_points
        return cls(grid, np.zeros((n, n)), hermitian=True, real_symmetric=True)

    def conj(self) -> 'BivariateKernel':
        return BivariateKernel(self.grid, self.values.conj(), self.hermitian, self.real_symmetric)

    def hs_norm_sq(self) -> float:
        """Hilbert-Schmidt 范数平方 ∫∫|k|²"""
        return float(np.mean(np.abs(self.values) ** 2))

    def hs_norm(self) -> float:
        return float(np.sqrt(self.hs_norm_sq()))


@dataclass(frozen=True)
class FourierFrequency:
    """Fourier 频率 ω_k = 2πk/T"""
    index: int
    T: int

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f'样本长度必须为正: {self.T}')

    @property
    def value(self) -> float:
        return 2.0 * np.pi * self.index / self.T


def integrate_bi(k: BivariateKernel) -> complex:
    """
    二重积分 ∫₀¹∫₀¹ k(τ,σ) dτ dσ 的网格平均近似

    Returns:
        complex: 所有 G² 个取值的平均
    """
    return complex(np.mean(k.values))


def inner_product(a: ComplexCurve, b: ComplexCurve) -> complex:
    """内积 ⟨a,b⟩ = ∫ a·conj(b)，网格平均近似"""
    _check_same_grid(a.grid, b.grid)
    return complex(np.mean(a.values * np.conj(b.values)))


def mean_curve(x: FunctionalSample) -> np.ndarray:
    """逐点时间平均 X̄_T(τ)"""
    return x.values.mean(axis=0)


def autocov_kernel(x: FunctionalSample, lag: int, centered: bool = True) -> BivariateKernel:
    """
    自协方差核估计

    r̂_k(τ,σ) = (1/(T-k)) Σ_{t=k}^{T-1} (X_t(τ)-X̄(τ)) (X_{t-k}(σ)-X̄(σ))

    Args:
        x: 样本
        lag: 滞后阶 k，0 <= k <= T-1
        centered: 是否用全样本均值曲线中心化

    Returns:
        BivariateKernel: 实值核；k=0 时为实对称半正定矩阵
    """
    T = x.T
    if not 0 <= lag <= T - 1:
        raise ValueError(f'滞后阶 {lag} 超出范围 [0, {T - 1}]')
    y = x.values - mean_curve(x) if centered else x.values
    r = y[lag:].T @ y[:T - lag] / (T - lag)
    if lag == 0:
        r = 0.5 * (r + r.T)
    return BivariateKernel(x.grid, r, real_symmetric=(lag == 0), hermitian=(lag == 0))
