"""
样本 CSV 读写
行 = 时间下标 t（递增），列 = 网格点（τ 递增），UTF-8、逗号分隔、无表头。
写出时使用17位有效数字，读回无精度损失。
"""
import csv
import json
import logging
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from app.lib.core import FunctionalSample, Grid
from app.lib.exceptions import SampleFormatError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def read_sample_csv(path, header: bool = False, grid: Grid = None) -> FunctionalSample:
    """
    读取 T×G 样本矩阵

    Args:
        path: CSV 文件路径
        header: 首行是否为表头（跳过）
        grid: 网格；为空时按列数构造中点网格

    Returns:
        FunctionalSample

    Raises:
        SampleFormatError: 行长度不一致、非数值或文件为空；row/column 从0开始，对应数据行
    """
    rows = []
    width = None
    with open(path, newline='', encoding='utf-8') as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        for row_index, row in enumerate(reader):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise SampleFormatError(
                    f'第 {row_index} 行有 {len(row)} 列，期望 {width} 列',
                    row=row_index,
                )
            values = []
            for column, cell in enumerate(row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise SampleFormatError(
                        f'第 {row_index} 行第 {column} 列不是数值: {cell!r}',
                        row=row_index, column=column,
                    ) from None
            rows.append(values)
    if not rows:
        raise SampleFormatError(f'文件中没有数据: {path}')
    if width < 2:
        raise SampleFormatError(f'每行至少需要2个网格点，当前 {width} 列')
    logger.debug(f'读取样本 {path}: T={len(rows)}, G={width}')
    return FunctionalSample.from_array(np.array(rows, dtype=float), grid)


def write_sample_csv(sample: FunctionalSample, path, metadata: Optional[Dict] = None) -> Path:
    """
    写出样本矩阵，metadata 非空时写入同名 .json 附属文件

    Returns:
        Path: CSV 文件路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, sample.values, fmt=FLOAT_FORMAT, delimiter=',', encoding='utf-8')
    if metadata is not None:
        sidecar_path(path).write_text(
            json.dumps(metadata, sort_keys=True, indent=2, ensure_ascii=False), encoding='utf-8'
        )
    logger.debug(f'写出样本 {path}: T={sample.T}, G={sample.n_points}')
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(path.suffix + '.json')
