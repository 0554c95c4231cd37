"""
Celery任务定义
蒙特卡洛重复块在 worker 上执行，与本地线程池共用同一个块函数
"""
import logging

from app.services.monte_carlo import run_replication_block

logger = logging.getLogger(__name__)

# 可选：如果celery未安装，使用占位符
try:
    from celery import shared_task

    @shared_task(bind=True)
    def run_replication_block_task(self, experiment_data, cell_index, start, stop):
        """
        执行一个重复块

        Args:
            experiment_data: Experiment.to_dict() 的结果
            cell_index: 单元下标
            start: 起始重复下标（含）
            stop: 结束重复下标（不含）

        Returns:
            Dict: 块结果，失败的重复记录在 errors 中
        """
        logger.info(f'执行重复块: task_id={self.request.id}, cell={cell_index}, reps=[{start}, {stop})')
        result = run_replication_block(experiment_data, cell_index, start, stop)
        if result['errors']:
            logger.warning(f'重复块中有 {len(result["errors"])} 次失败: cell={cell_index}, start={start}')
        return result
except ImportError:
    # Celery未安装时的占位符
    run_replication_block_task = None
