"""
FARCH(1) 泛函 ARCH 过程
X_t(τ) = ε_t(τ)·√(τ + ∫ c_ψ·exp((τ²+σ²)/2)·X²_{t-1}(σ) dσ)，ε_t 为 i.i.d. 标准布朗运动

各期曲线不相关但不独立（平方过程存在依赖），属于原假设。
"""
import numpy as np

from app.lib.base_generator import BaseGenerator
from app.lib.exceptions import SimulationError
from app.lib.simulate import brownian_motion_path


class Plugin(BaseGenerator):
    """FARCH(1) 生成插件"""

    REQUIRED_KEYS = ['c_psi', 'burn_in']

    def generate(self, grid, n_curves, rng):
        self.validate_config(self.REQUIRED_KEYS)
        tau = grid.points
        n = grid.n_points
        burn_in = int(self.config['burn_in'])
        c_psi = float(self.config['c_psi'])
        volatility = c_psi * np.exp(np.add.outer(tau ** 2, tau ** 2) / 2.0) / n

        eps = brownian_motion_path(grid, rng, size=burn_in + n_curves)
        out = np.empty((burn_in + n_curves, n))
        previous = np.zeros(n)
        for t in range(burn_in + n_curves):
            previous = eps[t] * np.sqrt(tau + volatility @ previous ** 2)
            out[t] = previous
        if not np.all(np.isfinite(out)):
            self.log_error(f'FARCH(1) 递推发散: c_psi={c_psi}')
            raise SimulationError('FARCH(1) 递推出现非有限值')
        return out[burn_in:]
