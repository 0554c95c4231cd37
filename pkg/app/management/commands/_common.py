"""
管理命令的公共部分：参数校验、异常到退出码的转换、输出
"""
import logging
from pathlib import Path

from django.core.management.base import CommandError

from app.lib.exceptions import (
    DegenerateDataError,
    GridMismatchError,
    InsufficientSampleError,
    InvalidGeneratorError,
    SampleFormatError,
)
from app.serializers import RunConfigSerializer

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_DEGENERATE = 3

INVALID_INPUT_ERRORS = (
    SampleFormatError,
    GridMismatchError,
    InsufficientSampleError,
    InvalidGeneratorError,
)


def validated_config(subcommand, options):
    """
    用 RunConfigSerializer 校验命令行参数

    Raises:
        CommandError: 校验失败，退出码2
    """
    data = {key: value for key, value in options.items() if key in RunConfigSerializer().fields}
    data['subcommand'] = subcommand
    serializer = RunConfigSerializer(data=data)
    if not serializer.is_valid():
        messages = '; '.join(
            f'{field}: {" ".join(str(e) for e in errors)}' for field, errors in serializer.errors.items()
        )
        raise CommandError(f'参数无效: {messages}', returncode=EXIT_INVALID)
    return serializer.validated_data


def command_error(exc):
    """把库层异常转换为带退出码的 CommandError"""
    if isinstance(exc, DegenerateDataError):
        if exc.clipped:
            return CommandError(f'方差估计不可用（不是数据退化）: {exc}', returncode=EXIT_DEGENERATE)
        return CommandError(f'数据退化: {exc}', returncode=EXIT_DEGENERATE)
    if isinstance(exc, SampleFormatError):
        location = []
        if exc.row is not None:
            location.append(f'row={exc.row}')
        if exc.column is not None:
            location.append(f'column={exc.column}')
        suffix = f' ({", ".join(location)})' if location else ''
        return CommandError(f'数据格式错误{suffix}: {exc}', returncode=EXIT_INVALID)
    if isinstance(exc, (INVALID_INPUT_ERRORS + (OSError,))):
        return CommandError(f'输入无效: {exc}', returncode=EXIT_INVALID)
    return CommandError(f'执行失败: {exc}', returncode=EXIT_FAILURE)


def emit(command, text, output=None):
    """写出到文件（给定 --output 时）或标准输出"""
    if output:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + '\n', encoding='utf-8')
        command.stderr.write(command.style.SUCCESS(f'✓ 已写出: {path}'))
    else:
        command.stdout.write(text)
