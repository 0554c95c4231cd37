"""
异常定义
库层只抛出这些异常（均继承 ValueError），管理命令再统一转换为退出码
"""


class GridMismatchError(ValueError):
    """两个对象不在同一网格上"""


class InsufficientSampleError(ValueError):
    """样本长度不足以计算所需统计量"""


class SampleFormatError(ValueError):
    """
    样本数据格式错误

    Attributes:
        row: 出错的数据行（从0开始，对应时间下标 t），未知时为 None
        column: 出错的列（从0开始，对应网格点），未知时为 None
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateDataError(ValueError):
    """
    方差估计为0，统计量无法标准化

    Attributes:
        clipped: True 表示 v̂²_{H1} 的估计为负、被截断为0（小样本白噪声也会出现），
            False 表示数据本身退化（如常数样本）
    """

    def __init__(self, message, clipped=False):
        super().__init__(message)
        self.clipped = clipped


class InvalidGeneratorError(ValueError):
    """数据生成过程的配置无效或未知"""


class SimulationError(ValueError):
    """模拟过程中出现非有限值"""


class ReplicationError(ValueError):
    """
    蒙特卡洛某次重复失败

    Attributes:
        cell: 出错的单元（如 'iid_bm/T=256'）
        replication: 重复下标
    """

    def __init__(self, message, cell=None, replication=None):
        super().__init__(message)
        self.cell = cell
        self.replication = replication
