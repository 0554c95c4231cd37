"""
数值库：网格与样本、谱域统计量、检验、数据生成过程
"""
