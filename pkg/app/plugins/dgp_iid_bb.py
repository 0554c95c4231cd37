"""
i.i.d. 布朗桥
"""
from app.lib.base_generator import BaseGenerator
from app.lib.simulate import brownian_bridge_path


class Plugin(BaseGenerator):
    """i.i.d. 布朗桥生成插件"""

    def generate(self, grid, n_curves, rng):
        return brownian_bridge_path(grid, rng, size=n_curves)
