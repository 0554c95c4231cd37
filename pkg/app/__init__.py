# 泛函时间序列谱域白噪声检验

__version__ = '0.1.0'
