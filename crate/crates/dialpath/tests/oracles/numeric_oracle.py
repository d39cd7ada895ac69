#!/usr/bin/env python3
"""Independent numeric oracles frozen into the Rust tests.

- label-smoothed cross entropy on a fixed logit row
- Adam trajectory for a single scalar parameter under the warm-up schedule

Run: python3 tests/oracles/numeric_oracle.py
"""
import math


def smoothed_ce(logits, target, eps):
    k = len(logits)
    mx = max(logits)
    lse = mx + math.log(sum(math.exp(x - mx) for x in logits))
    y = [eps / k + (1.0 - eps if j == target else 0.0) for j in range(k)]
    return lse - sum(yj * xj for yj, xj in zip(y, logits))


def lr(step, base, warmup):
    s = max(step, 1)
    return base * min(s / warmup, math.sqrt(warmup / s))


def adam_trace(x0, grads, base_lr, warmup, beta1=0.9, beta2=0.999, eps=1e-8):
    x, m, v = x0, 0.0, 0.0
    out = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        x -= lr(t, base_lr, warmup) * mhat / (math.sqrt(vhat) + eps)
        out.append(x)
    return out


def main():
    print("smoothed_ce:", repr(smoothed_ce([0.5, -1.0, 2.0, 0.0], 2, 0.1)))
    grads = [0.1, -0.2, 0.3, 0.1, 0.0, -0.05]
    trace = adam_trace(0.5, grads, base_lr=0.01, warmup=3)
    for i, x in enumerate(trace, start=1):
        print(f"adam step {i}: {x!r}")
    print("lr(1):", repr(lr(1, 0.01, 3)), "lr(3):", repr(lr(3, 0.01, 3)), "lr(12):", repr(lr(12, 0.01, 3)))


if __name__ == "__main__":
    main()
