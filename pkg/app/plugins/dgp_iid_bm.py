"""
i.i.d. 标准布朗运动
原假设下的基准过程
"""
from app.lib.base_generator import BaseGenerator
from app.lib.simulate import brownian_motion_path


class Plugin(BaseGenerator):
    """i.i.d. 布朗运动生成插件"""

    def generate(self, grid, n_curves, rng):
        return brownian_motion_path(grid, rng, size=n_curves)
