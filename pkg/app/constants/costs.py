# FLOPs 计数约定
#
# 一次乘加 (MAC) 记 2 FLOPs，偏置加法不计。
# 归一化与激活按每个元素的固定开销计入。

FLOPS_PER_MAC = 2

LAYER_NORM = 5       # 均值、方差、归一化、仿射
BATCH_NORM = 2       # 推理时折叠为逐通道仿射
SWISH = 4
GLU = 5
RELU = 1
SOFTMAX = 5          # 每个注意力分数：减最大值、exp、求和、除法
RESIDUAL_ADD = 1
POSITION_ADD = 1
SCALING = 0          # 推理时并入后续线性层

# 相对位置注意力：位置编码的投影与输入无关，每个长度算一次后缓存，计 0；
# 位置分数按 T x T 个保留项计（每项是 q_i + v 与距离 i-j 处位置向量的点积）

# 消融阶梯中“持平”的判定阈值（相对变化）
FLAT_THRESHOLD = 0.005
