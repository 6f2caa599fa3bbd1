# 数值与日志相关的工具函数
