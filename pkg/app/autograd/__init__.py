from app.autograd.tensor import Tape, TapeEntry, Tensor, active_tape, backward
from app.autograd.ops import (
    add, as_tensor, conv2d, exp, getitem, linear, matmul, mean, mse_loss, mul, neg, relu, reshape,
    scale, scaled_dot_product_attention, sigmoid, softmax, sub, swap_last, tanh, transpose,
)
from app.autograd.ops import sum as tensor_sum
from app.autograd.optim import Adam, AdamState, adam_step
from app.autograd.params import count_parameters, count_shapes, glorot_uniform
