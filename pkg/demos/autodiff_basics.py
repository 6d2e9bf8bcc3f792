"""Walk through the tape-based autodiff layer: record an expression,
run the backward pass, and cross-check against finite differences.
Finishes by fitting a tiny two-layer network with the same machinery.
"""

import numpy as np

from docbinformer.autodiff import (
    Tape, Tensor, add, gelu, matmul, mean, mul, softmax, square, sub, sum_,
)


def finite_difference(f, x, h=1e-6):
    grad = np.zeros_like(x)
    flat, gflat = x.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * h)
    return grad


def main():
    rng = np.random.default_rng(0)

    # 1. A scalar expression: loss = sum(softmax(x W) * t)
    x = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    targets = Tensor(rng.random((4, 5)))

    with Tape() as tape:
        probs = softmax(matmul(x, w), axis=-1)
        loss = sum_(mul(probs, targets))
        tape.backward(loss)

    print("loss:", float(loss.data))
    print("grad wrt x, first row:", x.grad[0])

    def loss_of_x(xv):
        probs = softmax(matmul(Tensor(xv), Tensor(w.data)), axis=-1)
        return float(sum_(mul(probs, targets)).data)

    numeric = finite_difference(loss_of_x, x.data.copy())
    gap = np.max(np.abs(numeric - x.grad))
    print(f"max |analytic - numeric| = {gap:.2e}")

    # 2. Gradient descent on a small regression problem.
    inputs = rng.standard_normal((64, 8))
    truth = np.tanh(inputs @ rng.standard_normal((8, 1)))

    w1 = Tensor(0.3 * rng.standard_normal((8, 16)), requires_grad=True)
    b1 = Tensor(np.zeros(16), requires_grad=True)
    w2 = Tensor(0.3 * rng.standard_normal((16, 1)), requires_grad=True)
    b2 = Tensor(np.zeros(1), requires_grad=True)
    params = [w1, b1, w2, b2]

    for step in range(200):
        for p in params:
            p.zero_grad()
        with Tape() as tape:
            hidden = gelu(add(matmul(Tensor(inputs), w1), b1))
            predicted = add(matmul(hidden, w2), b2)
            loss = mean(square(sub(predicted, Tensor(truth))))
            tape.backward(loss)
        for p in params:
            p.data -= 0.05 * p.grad
        if step % 50 == 0 or step == 199:
            print(f"step {step:3d}  mse {float(loss.data):.5f}")


if __name__ == "__main__":
    main()
