"""
服务模块
"""

