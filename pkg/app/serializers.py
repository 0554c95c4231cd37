"""
序列化器
运行配置校验以及检验报告 / 实验结果的 JSON 结构
"""
import json

from rest_framework import serializers

import app
from app.lib.inference import (
    H0_CONSISTENT,
    H0_NORMALIZATIONS,
    MODE_CLASSICAL,
    PRECISE_MODES,
    VARIANCE_CHOICES,
    VARIANCE_H0,
)
from app.lib.simulate import DEFAULT_C_PSI, GENERATOR_KINDS, INNOVATION_KINDS, KERNEL_KINDS
from app.services.monte_carlo import BACKENDS, EXPERIMENT_MODES, SCHEMA_VERSION
from app.services.presets import PRESETS

SUBCOMMANDS = ('test', 'simulate', 'mc')


class RunConfigSerializer(serializers.Serializer):
    """命令行参数校验（test / simulate / mc 共用）"""
    subcommand = serializers.ChoiceField(choices=SUBCOMMANDS)
    input = serializers.CharField(required=False, allow_null=True, default=None)
    output = serializers.CharField(required=False, allow_null=True, default=None)
    alpha = serializers.FloatField(required=False, default=0.05)
    alphas = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True, default=None)
    mode = serializers.ChoiceField(choices=EXPERIMENT_MODES, required=False, default=MODE_CLASSICAL)
    delta = serializers.FloatField(required=False, allow_null=True, default=None)
    variance = serializers.ChoiceField(choices=VARIANCE_CHOICES, required=False, default=VARIANCE_H0)
    h0_normalization = serializers.ChoiceField(choices=list(H0_NORMALIZATIONS), required=False,
                                               default=H0_CONSISTENT)
    debias = serializers.BooleanField(required=False, default=False)
    grid_size = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=2)
    T = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False,
                              allow_null=True, default=None)
    model = serializers.ChoiceField(choices=GENERATOR_KINDS, required=False, allow_null=True, default=None)
    kernel = serializers.ChoiceField(choices=KERNEL_KINDS, required=False, default='wiener')
    hs_norm = serializers.FloatField(required=False, default=0.3)
    innovation = serializers.ChoiceField(choices=INNOVATION_KINDS, required=False, default='bm')
    c_psi = serializers.FloatField(required=False, default=DEFAULT_C_PSI)
    seed = serializers.IntegerField(required=False, default=0, min_value=0, max_value=2 ** 64 - 1)
    threads = serializers.IntegerField(required=False, default=1, min_value=1)
    burn_in = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=0)
    pt = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    reps = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    preset = serializers.ChoiceField(choices=PRESETS, required=False, allow_null=True, default=None)
    backend = serializers.ChoiceField(choices=BACKENDS, required=False, allow_null=True, default=None)
    target = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0)
    oracle_T = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=4)
    full_scale = serializers.BooleanField(required=False, default=False)
    header = serializers.BooleanField(required=False, default=False)
    format = serializers.ChoiceField(choices=['json'], required=False, default='json')

    def validate_alpha(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError(f'显著性水平必须在 (0,1) 内: {value}')
        return value

    def validate_alphas(self, value):
        if value is not None and any(not 0.0 < a < 1.0 for a in value):
            raise serializers.ValidationError(f'显著性水平必须在 (0,1) 内: {value}')
        return value

    def validate_hs_norm(self, value):
        if not 0.0 <= value < 1.0:
            raise serializers.ValidationError(f'HS 范数必须在 [0,1) 内以保证平稳: {value}')
        return value

    def validate_c_psi(self, value):
        if value < 0:
            raise serializers.ValidationError(f'FARCH(1) 常数 c_psi 不能为负: {value}')
        return value

    def validate(self, data):
        """验证参数之间的一致性"""
        subcommand = data['subcommand']
        mode = data['mode']

        if mode in PRECISE_MODES and data.get('delta') is None:
            raise serializers.ValidationError({'delta': f'{mode} 模式必须提供 --delta'})
        if mode not in PRECISE_MODES and data.get('delta') is not None:
            raise serializers.ValidationError({'delta': '只有 relevant / similarity 模式接受 --delta'})
        if data.get('delta') is not None and data['delta'] < 0:
            raise serializers.ValidationError({'delta': 'Δ 必须非负'})

        if subcommand == 'test':
            if not data.get('input'):
                raise serializers.ValidationError({'input': 'test 需要 --input'})
            if mode == 'ci':
                raise serializers.ValidationError({'mode': 'ci 模式只用于 mc'})
        elif subcommand == 'simulate':
            if not data.get('output'):
                raise serializers.ValidationError({'output': 'simulate 需要 --output'})
            if not data.get('model'):
                raise serializers.ValidationError({'model': 'simulate 需要 --model'})
            if not data.get('T') or len(data['T']) != 1:
                raise serializers.ValidationError({'T': 'simulate 需要一个 --T'})
        elif subcommand == 'mc':
            if not data.get('preset') and not data.get('model'):
                raise serializers.ValidationError({'model': 'mc 需要 --preset 或 --model'})
            if not data.get('preset') and not data.get('T'):
                raise serializers.ValidationError({'T': '自定义实验需要 --T'})
            if data.get('preset') and mode != MODE_CLASSICAL:
                raise serializers.ValidationError({'mode': '预置实验只支持 classical 模式'})
        return data


class TestReportSerializer(serializers.Serializer):
    """单次检验报告"""
    schema_version = serializers.CharField()
    library_version = serializers.CharField()
    seed = serializers.IntegerField(allow_null=True)
    grid_size = serializers.IntegerField()
    T = serializers.IntegerField()
    mode = serializers.CharField()
    variance = serializers.CharField()
    alpha = serializers.FloatField()
    delta = serializers.FloatField(allow_null=True)
    m_hat_sq = serializers.FloatField()
    v_h0 = serializers.FloatField()
    v_h1 = serializers.FloatField(allow_null=True)
    z = serializers.FloatField()
    p_value = serializers.FloatField()
    critical_value = serializers.FloatField()
    decision = serializers.ChoiceField(choices=['reject', 'retain'])
    ci = serializers.ListField(child=serializers.FloatField(), allow_null=True)
    m_tilde_sq = serializers.FloatField(allow_null=True)
    p_T = serializers.IntegerField(allow_null=True)
    power_plugin = serializers.FloatField(allow_null=True)
    non_gaussian_warning = serializers.BooleanField()
    h0_normalization = serializers.CharField()
    debiased = serializers.BooleanField()
    h1_clipped = serializers.BooleanField()
    metadata = serializers.JSONField()

    # 避免被 unittest 收集为测试类
    __test__ = False

    @classmethod
    def from_report(cls, report, grid_size, seed=None, **metadata):
        data = report.to_dict()
        data.update(schema_version=SCHEMA_VERSION, library_version=app.__version__,
                    seed=seed, grid_size=grid_size)
        data['metadata'] = {**data.get('metadata', {}), **metadata}
        return cls(data)


class ExperimentCellSerializer(serializers.Serializer):
    key = serializers.CharField()
    T = serializers.IntegerField()
    alpha = serializers.FloatField()
    n = serializers.IntegerField()
    rejections = serializers.IntegerField()
    rejection_rate = serializers.FloatField()
    standard_error = serializers.FloatField()
    seed = serializers.IntegerField()
    mean_m_hat_sq = serializers.FloatField()
    mean_v_h0 = serializers.FloatField()
    mean_v_h1 = serializers.FloatField(allow_null=True)
    predicted_power = serializers.FloatField(allow_null=True)
    coverage = serializers.FloatField(allow_null=True)
    reference_rate = serializers.FloatField(allow_null=True)
    z_summary = serializers.JSONField(allow_null=True)
    h1_clipped = serializers.IntegerField()
    wall_time = serializers.FloatField()


class ExperimentResultSerializer(serializers.Serializer):
    schema_version = serializers.CharField()
    library_version = serializers.CharField()
    name = serializers.CharField()
    mode = serializers.CharField()
    seed = serializers.IntegerField()
    grid_size = serializers.IntegerField()
    T = serializers.ListField(child=serializers.IntegerField())
    target_m0_sq = serializers.FloatField(allow_null=True)
    cells = ExperimentCellSerializer(many=True)
    experiment = serializers.JSONField()
    environment = serializers.JSONField()
    wall_time = serializers.FloatField()


class ExperimentReportSerializer(serializers.Serializer):
    """fwn_mc 输出的文档：一个或多个实验结果（预置实验每个数据生成过程一个）"""
    schema_version = serializers.CharField()
    library_version = serializers.CharField()
    preset = serializers.CharField(allow_null=True)
    seed = serializers.IntegerField()
    grid_size = serializers.IntegerField()
    T = serializers.ListField(child=serializers.IntegerField())
    results = ExperimentResultSerializer(many=True)
    diagnostics = serializers.JSONField(allow_null=True)
    run_id = serializers.IntegerField(allow_null=True)

    @classmethod
    def from_results(cls, results, preset=None, diagnostics=None, run_id=None):
        payloads = [result_payload(r) for r in results]
        first = payloads[0]
        return cls({
            'schema_version': SCHEMA_VERSION,
            'library_version': app.__version__,
            'preset': preset,
            'seed': first['seed'],
            'grid_size': first['grid_size'],
            'T': first['T'],
            'results': payloads,
            'diagnostics': diagnostics,
            'run_id': run_id,
        })


def result_payload(result):
    """ExperimentResult 加上版本、种子、网格点数、样本长度"""
    data = result.to_dict()
    data.update(
        library_version=app.__version__,
        seed=result.experiment['seed'],
        grid_size=result.experiment['dgp']['grid_size'],
        T=result.experiment['T_values'],
    )
    return data


def render_json(data) -> str:
    """稳定键顺序的 JSON 文本"""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False)
