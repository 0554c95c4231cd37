"""
按数据生成过程模拟样本并写出 CSV（附 JSON 元数据文件）
"""
import logging

from django.conf import settings
from django.core.management.base import BaseCommand

import app
from app.lib.core import Grid
from app.lib.simulate import (
    DEFAULT_C_PSI,
    DEFAULT_HS_NORM,
    GENERATOR_KINDS,
    INNOVATION_KINDS,
    KERNEL_KINDS,
    DgpSpec,
    simulate,
)
from app.services.monte_carlo import SCHEMA_VERSION
from app.utils.csv_matrix import sidecar_path, write_sample_csv

from ._common import command_error, validated_config

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = '模拟泛函时间序列样本'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, choices=GENERATOR_KINDS, help='数据生成过程')
        parser.add_argument('--T', type=int, required=True, help='曲线条数')
        parser.add_argument('--output', required=True, help='CSV 输出路径')
        parser.add_argument('--grid-size', type=int, default=getattr(settings, 'FWN_GRID_SIZE', 100),
                            help='网格点数 G（中点网格）')
        parser.add_argument('--kernel', choices=KERNEL_KINDS, default='wiener', help='FAR(1) 算子核')
        parser.add_argument('--hs-norm', type=float, default=DEFAULT_HS_NORM, help='FAR(1) 核的 HS 范数，[0,1)')
        parser.add_argument('--innovation', choices=INNOVATION_KINDS, default='bm', help='FAR(1) 新息')
        parser.add_argument('--c-psi', type=float, default=DEFAULT_C_PSI, help='FARCH(1) 常数')
        parser.add_argument('--burn-in', type=int, default=getattr(settings, 'FWN_BURN_IN', 200))
        parser.add_argument('--seed', type=int, default=0, help='64位主种子')

    def handle(self, *args, **options):
        options = {**options, 'T': [options['T']]}
        config = validated_config('simulate', options)
        try:
            spec = DgpSpec(
                kind=config['model'],
                grid=Grid.midpoint(config['grid_size']),
                T=config['T'][0],
                seed=config['seed'],
                kernel=config['kernel'],
                hs_norm=config['hs_norm'],
                innovation=config['innovation'],
                burn_in=config['burn_in'],
                c_psi=config['c_psi'],
            )
            sample = simulate(spec)
            metadata = {
                'schema_version': SCHEMA_VERSION,
                'library_version': app.__version__,
                'dgp': spec.to_config(),
            }
            path = write_sample_csv(sample, config['output'], metadata=metadata)
        except (ValueError, OSError) as exc:
            logger.error(f'模拟失败: {exc}')
            raise command_error(exc) from exc

        logger.info(f'模拟完成: {spec.label()}, T={spec.T}, G={spec.grid.n_points}, seed={spec.seed}')
        self.stdout.write(self.style.SUCCESS(f'✓ 已写出 {path}（元数据: {sidecar_path(path)}）'))
