"""
FAR(1) 泛函自回归
X_t - μ = ρ(X_{t-1} - μ) + ε_t，ρ 为积分算子 (ρx)(τ) = ∫ K(τ,σ) x(σ) dσ

核为高斯核或 Wiener 核，HS 范数归一化到目标值；新息为布朗运动或布朗桥。
递推从零曲线开始，丢弃前 burn_in 步。
"""
import numpy as np

from app.lib.base_generator import BaseGenerator
from app.lib.exceptions import SimulationError
from app.lib.simulate import far1_kernel, innovations


class Plugin(BaseGenerator):
    """FAR(1) 生成插件"""

    REQUIRED_KEYS = ['kernel', 'hs_norm', 'innovation', 'burn_in']

    def generate(self, grid, n_curves, rng):
        self.validate_config(self.REQUIRED_KEYS)
        kernel = far1_kernel(self.config['kernel'], grid, self.config['hs_norm']).values.real
        burn_in = int(self.config['burn_in'])
        n = grid.n_points
        # 一次性抽取全部新息，保证同一随机流下结果与分块方式无关
        eps = innovations(self.config['innovation'], grid, rng, burn_in + n_curves)
        # 积分算子的求积权重 1/G
        operator = kernel / n

        out = np.empty((burn_in + n_curves, n))
        current = np.zeros(n)
        for t in range(burn_in + n_curves):
            current = operator @ current + eps[t]
            out[t] = current
        if not np.all(np.isfinite(out)):
            self.log_error(f'FAR(1) 递推发散: kernel={self.config["kernel"]}, hs_norm={self.config["hs_norm"]}')
            raise SimulationError('FAR(1) 递推出现非有限值')

        sample = out[burn_in:]
        mean = self.config.get('mean')
        if mean is not None:
            sample = sample + np.asarray(mean, dtype=float)
        return sample
