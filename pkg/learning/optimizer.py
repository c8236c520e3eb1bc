"""
Adam over PolicyParams, and global gradient-norm clipping
"""

import numpy as np

import config


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.arrays().values())))


def clip_grad_norm(grads, max_norm=config.MAX_GRAD_NORM):
    """Scale grads in place so their global L2 norm is at most max_norm; returns the pre-clip norm"""
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm > 0:
        scale = max_norm / norm
        for g in grads.arrays().values():
            g *= scale
    return norm


class Adam:
    """First/second-moment adaptive steps with bias correction"""

    def __init__(self, learning_rate=config.LEARNING_RATE, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        """Descend on grads, updating params in place"""
        self.t += 1
        lr_t = self.learning_rate * np.sqrt(1.0 - self.beta2 ** self.t) / (1.0 - self.beta1 ** self.t)
        for name, g in grads.arrays().items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            getattr(params, name)[...] -= lr_t * m / (np.sqrt(v) + self.eps)
        params.clamp_log_std()
        return params

    def state_arrays(self):
        arrays = {"adam/t": np.array(self.t, dtype=np.int64)}
        for name in self.m:
            arrays[f"adam/m/{name}"] = self.m[name]
            arrays[f"adam/v/{name}"] = self.v[name]
        return arrays

    def load_state_arrays(self, arrays):
        self.t = int(arrays.get("adam/t", 0))
        self.m, self.v = {}, {}
        for key, value in arrays.items():
            if key.startswith("adam/m/"):
                self.m[key[len("adam/m/"):]] = np.array(value, dtype=np.float64)
            elif key.startswith("adam/v/"):
                self.v[key[len("adam/v/"):]] = np.array(value, dtype=np.float64)
        return self
