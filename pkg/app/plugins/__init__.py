# 数据生成过程插件（dgp_<kind>.py，每个文件导出继承 BaseGenerator 的 Plugin 类）
