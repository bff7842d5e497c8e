"""
Reverse-mode differentiation on a tape
======================================

Every operation records its parents and a backward rule.  ``backward``
walks the recorded nodes from newest to oldest and accumulates gradients
into the leaves.
"""

import numpy as np

from samgcl import tensor as T
from samgcl.tensor import Tensor

# %%
# A two-layer perceptron written with the primitive ops.
rng = np.random.default_rng(0)
x = Tensor(rng.normal(size=(5, 3)))
W1 = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
W2 = Tensor(rng.normal(size=(4, 1)), requires_grad=True)


def loss():
    h = T.relu(T.matmul(x, W1))
    out = T.matmul(h, W2)
    return T.mean(T.elementwise_mul(out, out))


L = loss()
L.backward()
print("loss", L.item())
print("dL/dW2", W2.grad.ravel())

# %%
# Central finite differences agree with the tape.
W1.zero_grad()
W2.zero_grad()
print(T.fd_check(loss, [W1, W2]))

# %%
# ``stop_gradient`` is the identity going forward and a wall going back.
y = Tensor([[3.0]], requires_grad=True)
T.sum(T.elementwise_mul(y, T.stop_gradient(y))).backward()
print("d/dy of y * sg(y) at 3:", y.grad.item())
