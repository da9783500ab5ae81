from app.autograd.tensor import ComputeGraph, Tensor, as_tensor, backward, grad, is_grad_enabled, no_grad
from app.autograd.gradcheck import GradcheckResult, gradcheck
