"""
数据模型定义
"""
from django.db import models
from django.utils import timezone


class ExperimentRun(models.Model):
    """蒙特卡洛实验运行记录"""
    STATUS_CHOICES = [
        ('pending', '待执行'),
        ('running', '执行中'),
        ('success', '成功'),
        ('failed', '失败'),
    ]

    name = models.CharField(max_length=200, verbose_name='实验名称')
    preset = models.CharField(max_length=50, blank=True, verbose_name='预置实验')
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='pending', verbose_name='状态')
    seed = models.BigIntegerField(default=0, verbose_name='主种子')
    backend = models.CharField(max_length=20, default='threads', verbose_name='并行后端')
    threads = models.IntegerField(default=1, verbose_name='线程数')
    config = models.JSONField(default=dict, verbose_name='实验配置')
    result = models.JSONField(default=dict, blank=True, verbose_name='实验结果')
    error_message = models.TextField(blank=True, verbose_name='错误信息')
    started_at = models.DateTimeField(null=True, blank=True, verbose_name='开始时间')
    finished_at = models.DateTimeField(null=True, blank=True, verbose_name='结束时间')
    execution_time = models.FloatField(null=True, blank=True, verbose_name='执行耗时(秒)')
    created_at = models.DateTimeField(auto_now_add=True, verbose_name='创建时间')

    class Meta:
        db_table = 'experiment_runs'
        verbose_name = '实验运行记录'
        verbose_name_plural = '实验运行记录'
        ordering = ['-created_at']

    def __str__(self):
        return f'{self.name} ({self.get_status_display()})'

    def mark_running(self):
        self.status = 'running'
        self.started_at = timezone.now()
        self.save(update_fields=['status', 'started_at'])

    def mark_finished(self, result=None, error_message=''):
        """
        结束运行，error_message 非空时记为失败

        Args:
            result: 实验结果（JSON 字典）
            error_message: 错误信息
        """
        self.finished_at = timezone.now()
        if self.started_at:
            self.execution_time = (self.finished_at - self.started_at).total_seconds()
        self.status = 'failed' if error_message else 'success'
        self.result = result or {}
        self.error_message = error_message
        self.save()
