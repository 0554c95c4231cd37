"""
Celery应用配置
蒙特卡洛重复实验可以按块分发到 worker 上执行
"""
import os
import logging

logger = logging.getLogger(__name__)

# 尝试导入Celery
try:
    from celery import Celery

    # 设置Django settings模块
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'fwnspec.settings')

    app = Celery('fwnspec')
    CELERY_AVAILABLE = True
except ImportError:
    # Celery未安装时，使用占位符
    CELERY_AVAILABLE = False
    app = None
    logger.warning("Celery未安装，分布式蒙特卡洛将不可用")

if CELERY_AVAILABLE:
    # 从Django settings中加载Celery配置
    app.config_from_object('django.conf:settings', namespace='CELERY')

    # 自动发现任务（app/tasks.py）
    app.autodiscover_tasks()
