"""
数据生成过程（DGP）插件基类
所有 app/plugins/dgp_*.py 中的 Plugin 类都需要继承此类
"""
import logging
from abc import ABC, abstractmethod

import numpy as np

from app.lib.core import Grid
from app.lib.exceptions import InvalidGeneratorError


class BaseGenerator(ABC):
    """DGP 插件基类"""

    def __init__(self, config=None):
        """
        初始化插件

        Args:
            config: 插件配置字典（来自 DgpSpec.to_config()）
        """
        self.config = config or {}
        self.logger = logging.getLogger(self.__class__.__module__)

    @abstractmethod
    def generate(self, grid: Grid, n_curves: int, rng: np.random.Generator) -> np.ndarray:
        """
        生成样本

        Args:
            grid: 网格
            n_curves: 曲线条数 T（不含 burn-in）
            rng: 随机数生成器，插件内不得使用其它随机源

        Returns:
            np.ndarray: n_curves × G 实矩阵
        """

    def validate_config(self, required_keys):
        """
        验证配置是否包含必需的键

        Raises:
            InvalidGeneratorError: 配置验证失败
        """
        missing_keys = [key for key in required_keys if key not in self.config]
        if missing_keys:
            raise InvalidGeneratorError(f"缺少必需的配置项: {', '.join(missing_keys)}")
        return True

    def log_error(self, message, exc_info=False):
        """记录错误日志"""
        self.logger.error(message, exc_info=exc_info)
