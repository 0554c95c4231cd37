"""
蒙特卡洛实验：预置实验 table1 / table2 或自定义数据生成过程
输出 JSON 文档，每个单元包含拒绝率、标准误、重复次数、种子和用时
"""
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from app.lib.core import Grid
from app.lib.exceptions import ReplicationError
from app.lib.inference import H0_CONSISTENT, H0_NORMALIZATIONS, VARIANCE_CHOICES
from app.lib.simulate import (
    DEFAULT_C_PSI,
    DEFAULT_HS_NORM,
    GENERATOR_KINDS,
    INNOVATION_KINDS,
    KERNEL_KINDS,
    DgpSpec,
)
from app.models import ExperimentRun
from app.serializers import ExperimentReportSerializer, render_json
from app.services import monte_carlo
from app.services.presets import PRESETS, build_preset

from ._common import EXIT_INVALID, command_error, emit, validated_config

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = '蒙特卡洛实验：经验拒绝率、覆盖率与原假设分布诊断'

    def add_arguments(self, parser):
        parser.add_argument('--preset', choices=PRESETS, default=None, help='预置实验')
        parser.add_argument('--full-scale', action='store_true', help='完整规模：G=1000，1000 次重复')
        parser.add_argument('--model', choices=GENERATOR_KINDS, default=None, help='自定义实验的数据生成过程')
        parser.add_argument('--kernel', choices=KERNEL_KINDS, default='wiener')
        parser.add_argument('--hs-norm', type=float, default=DEFAULT_HS_NORM)
        parser.add_argument('--innovation', choices=INNOVATION_KINDS, default='bm')
        parser.add_argument('--c-psi', type=float, default=DEFAULT_C_PSI)
        parser.add_argument('--T', type=int, nargs='+', default=None, help='样本长度列表')
        parser.add_argument('--alpha', type=float, nargs='+', default=None, dest='alphas',
                            help='显著性水平列表（ci 模式为 1 - 置信水平）')
        parser.add_argument('--mode', choices=monte_carlo.EXPERIMENT_MODES, default='classical')
        parser.add_argument('--delta', type=float, default=None)
        parser.add_argument('--variance', choices=VARIANCE_CHOICES, default='h0')
        parser.add_argument('--h0-normalization', choices=list(H0_NORMALIZATIONS), default=H0_CONSISTENT,
                            dest='h0_normalization', help='自定义实验中 v̂_H0 的归一化常数')
        parser.add_argument('--debias', action='store_true', help='自定义实验使用去掉同频对角项的 M̂²')
        parser.add_argument('--target', type=float, default=None, help='ci 模式的 M₀² 目标值')
        parser.add_argument('--oracle-T', type=int, default=None, dest='oracle_T',
                            help='目标值未给出时，长路径的长度')
        parser.add_argument('--pt', type=int, default=None, help='长路径时域估计 M̃² 的截断阶')
        parser.add_argument('--reps', type=int, default=None, help='每个 T 的重复次数')
        parser.add_argument('--grid-size', type=int, default=None)
        parser.add_argument('--burn-in', type=int, default=None)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--threads', type=int, default=getattr(settings, 'FWN_THREADS', 1))
        parser.add_argument('--backend', choices=monte_carlo.BACKENDS, default=None)
        parser.add_argument('--block-size', type=int, default=None, help='每个并行任务的重复次数')
        parser.add_argument('--diagnostic', action='store_true', help='附带原假设下 z 的分布诊断')
        parser.add_argument('--record', action='store_true', help='把本次运行保存为 ExperimentRun')
        parser.add_argument('--output', default=None, help='JSON 输出路径，默认写到标准输出')

    def handle(self, *args, **options):
        config = validated_config('mc', options)
        try:
            experiments = self._experiments(config)
        except ValueError as exc:
            raise CommandError(f'实验配置无效: {exc}', returncode=EXIT_INVALID) from exc

        run_record = None
        if options['record']:
            run_record = ExperimentRun.objects.create(
                name=config['preset'] or experiments[0].name,
                preset=config['preset'] or '',
                seed=config['seed'],
                backend=config['backend'] or getattr(settings, 'FWN_PARALLEL_BACKEND', 'threads'),
                threads=config['threads'],
                config={'experiments': [e.to_dict() for e in experiments]},
            )
            run_record.mark_running()

        try:
            results, diagnostics = self._run(experiments, config, options)
        except ReplicationError as exc:
            logger.error(f'实验中止: cell={exc.cell}, replication={exc.replication}: {exc}')
            if run_record:
                run_record.mark_finished(error_message=str(exc))
            raise command_error(exc) from exc
        except Exception as exc:
            logger.error(f'实验失败: {exc}', exc_info=True)
            if run_record:
                run_record.mark_finished(error_message=str(exc))
            raise command_error(exc) from exc

        payload = ExperimentReportSerializer.from_results(
            results, preset=config['preset'], diagnostics=diagnostics,
            run_id=run_record.id if run_record else None,
        ).data
        if run_record:
            run_record.mark_finished(result=payload)
            self.stderr.write(self.style.SUCCESS(f'✓ 已保存运行记录 #{run_record.id}'))
        emit(self, render_json(payload), config['output'])

    def _experiments(self, config):
        if config['preset']:
            return build_preset(
                config['preset'], seed=config['seed'], full_scale=config['full_scale'],
                T_values=config['T'], alphas=config['alphas'], n_reps=config['reps'],
                grid_size=config['grid_size'], burn_in=config['burn_in'],
            )

        full_scale = config['full_scale']
        grid_size = config['grid_size'] or getattr(
            settings, 'FWN_FULL_SCALE_GRID_SIZE' if full_scale else 'FWN_GRID_SIZE', 100)
        n_reps = config['reps'] or getattr(settings, 'FWN_FULL_SCALE_REPS' if full_scale else 'FWN_REPS', 500)
        burn_in = getattr(settings, 'FWN_BURN_IN', 200) if config['burn_in'] is None else config['burn_in']
        spec = DgpSpec(
            kind=config['model'], grid=Grid.midpoint(grid_size), T=config['T'][0], seed=config['seed'],
            kernel=config['kernel'], hs_norm=config['hs_norm'], innovation=config['innovation'],
            burn_in=burn_in, c_psi=config['c_psi'],
        )
        return [monte_carlo.Experiment(
            dgp=spec,
            T_values=config['T'],
            alphas=config['alphas'] or [getattr(settings, 'FWN_DEFAULT_ALPHA', 0.05)],
            n_reps=n_reps,
            mode=config['mode'],
            delta=config['delta'],
            variance=config['variance'],
            h0_normalization=config['h0_normalization'],
            debias=config['debias'],
            seed=config['seed'],
            target_m0_sq=config['target'],
            oracle_T=config['oracle_T'] or getattr(settings, 'FWN_ORACLE_T', 2 ** 16),
            oracle_p_T=config['pt'] or getattr(settings, 'FWN_ORACLE_PT', 50),
        )]

    def _run(self, experiments, config, options):
        kwargs = {
            'threads': config['threads'],
            'backend': config['backend'],
            'block_size': options['block_size'],
        }
        results, diagnostics = [], []
        for experiment in experiments:
            self.stderr.write(f'运行实验 {experiment.name} ...')
            results.append(monte_carlo.run(experiment, **kwargs))
            if options['diagnostic'] and experiment.mode == 'classical':
                diagnostics.append(monte_carlo.null_distribution_diagnostic(experiment, **kwargs))
        return results, (diagnostics if options['diagnostic'] else None)
