"""A small variational autoencoder over action vectors, trained by hand.

The encoder maps an action to a diagonal Gaussian over the latent space
(linear mean head, rectified variance head with a small floor so the KL
stays finite); the decoder maps a latent back to an action mean squashed
into (0, 1)^d with a fixed output variance. Both nets have one hidden
layer. Training ascends the single-noise-sample bound

    elbo = -||a - decode(z)||^2 / (2 sigma^2) - KL(N(mu, var) || N(0, I)),
    z = mu + sqrt(var) * xi,  xi ~ N(0, I),

with plain fixed-step gradient ascent. The constant Gaussian log-normalizer
is dropped from the reconstruction term. Gradients are exact for this
objective (reparameterization path included), which keeps them checkable
against finite differences.

A trained prior generates actions by decoding latents drawn from N(0, I).
Instances are mutable during training: one writer at a time, read-only
sampling is safe between training steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO

import numpy as np

# Floor for the rectified variance head; a hard zero would make the KL blow up.
VAR_FLOOR = 1e-6

_PARAM_NAMES = (
    "enc_w1",
    "enc_b1",
    "enc_wmu",
    "enc_bmu",
    "enc_wvar",
    "enc_bvar",
    "dec_w1",
    "dec_b1",
    "dec_wout",
    "dec_bout",
)


@dataclass(frozen=True)
class VaeArch:
    """Layer sizes, fixed decoder variance, and the hidden nonlinearity."""

    input_dim: int = 1
    hidden_dim: int = 16
    latent_dim: int = 2
    decoder_variance: float = 0.01
    hidden_activation: str = "relu"

    def __post_init__(self):
        if min(self.input_dim, self.hidden_dim, self.latent_dim) < 1:
            raise ValueError("all dimensions must be >= 1")
        if not self.decoder_variance > 0.0:
            raise ValueError("decoder_variance must be positive")
        if self.hidden_activation not in ("relu", "sigmoid"):
            raise ValueError("hidden_activation must be 'relu' or 'sigmoid'")


@dataclass
class VaePrior:
    """Encoder/decoder weights acting as a sampleable prior over actions."""

    arch: VaeArch
    params: dict[str, np.ndarray]
    step_size: float = 0.01
    train_steps: int = 0


@dataclass(frozen=True)
class ElboReport:
    """Batch-mean reconstruction term, KL term, and their difference."""

    reconstruction: float
    kl: float
    elbo: float


def init_vae(
    arch: VaeArch, rng: np.random.Generator, step_size: float = 0.01
) -> VaePrior:
    """Random small weights, zero biases except a unit variance-head bias.

    Starting the variance head near 1 keeps it off the ReLU floor, where the
    KL gradient could not reach it.
    """
    d, h, lat = arch.input_dim, arch.hidden_dim, arch.latent_dim
    params = {
        "enc_w1": rng.normal(0.0, 1.0 / math.sqrt(d), size=(h, d)),
        "enc_b1": np.zeros(h),
        "enc_wmu": rng.normal(0.0, 1.0 / math.sqrt(h), size=(lat, h)),
        "enc_bmu": np.zeros(lat),
        "enc_wvar": rng.normal(0.0, 1.0 / math.sqrt(h), size=(lat, h)),
        "enc_bvar": np.ones(lat),
        "dec_w1": rng.normal(0.0, 1.0 / math.sqrt(lat), size=(h, lat)),
        "dec_b1": np.zeros(h),
        "dec_wout": rng.normal(0.0, 1.0 / math.sqrt(h), size=(d, h)),
        "dec_bout": np.zeros(d),
    }
    return VaePrior(arch=arch, params=params, step_size=step_size)


def zero_vae(arch: VaeArch, step_size: float = 0.01) -> VaePrior:
    """All-zero weights; encodes to (0, floor) and decodes everything to 0.5."""
    d, h, lat = arch.input_dim, arch.hidden_dim, arch.latent_dim
    shapes = {
        "enc_w1": (h, d),
        "enc_b1": (h,),
        "enc_wmu": (lat, h),
        "enc_bmu": (lat,),
        "enc_wvar": (lat, h),
        "enc_bvar": (lat,),
        "dec_w1": (h, lat),
        "dec_b1": (h,),
        "dec_wout": (d, h),
        "dec_bout": (d,),
    }
    return VaePrior(
        arch=arch, params={k: np.zeros(s) for k, s in shapes.items()}, step_size=step_size
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _hidden(pre: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0.0)
    return _sigmoid(pre)


def _hidden_grad(pre: np.ndarray, post: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (pre > 0.0).astype(float)
    return post * (1.0 - post)


def _encode_batch(prior: VaePrior, batch: np.ndarray):
    p = prior.params
    act = prior.arch.hidden_activation
    he_pre = batch @ p["enc_w1"].T + p["enc_b1"]
    he = _hidden(he_pre, act)
    mu = he @ p["enc_wmu"].T + p["enc_bmu"]
    var_pre = he @ p["enc_wvar"].T + p["enc_bvar"]
    var = np.maximum(var_pre, 0.0) + VAR_FLOOR
    return he_pre, he, mu, var_pre, var


def _decode_batch(prior: VaePrior, z: np.ndarray):
    p = prior.params
    act = prior.arch.hidden_activation
    hd_pre = z @ p["dec_w1"].T + p["dec_b1"]
    hd = _hidden(hd_pre, act)
    out = _sigmoid(hd @ p["dec_wout"].T + p["dec_bout"])
    return hd_pre, hd, out


def encode(prior: VaePrior, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior parameters (mean, diagonal variance) for one action."""
    _, _, mu, _, var = _encode_batch(prior, np.asarray(a, dtype=float)[None, :])
    return mu[0], var[0]


def decode(prior: VaePrior, z: np.ndarray) -> np.ndarray:
    """Deterministic action mean for one latent; lies in (0, 1)^d."""
    _, _, out = _decode_batch(prior, np.asarray(z, dtype=float)[None, :])
    return out[0]


def kl_to_standard_normal(mu: np.ndarray, var: np.ndarray) -> float:
    """Closed-form KL(N(mu, diag var) || N(0, I)) in nats."""
    mu = np.asarray(mu, dtype=float)
    var = np.asarray(var, dtype=float)
    if (var <= 0.0).any():
        raise ValueError("variances must be positive")
    kl = 0.5 * float(np.sum(mu * mu + var - np.log(var) - 1.0))
    return max(kl, 0.0)


def elbo_given_noise(
    prior: VaePrior, batch: np.ndarray, xi: np.ndarray
) -> ElboReport:
    """Single-sample bound with the noise draws supplied by the caller."""
    batch = np.asarray(batch, dtype=float)
    _, _, mu, _, var = _encode_batch(prior, batch)
    z = mu + np.sqrt(var) * xi
    _, _, out = _decode_batch(prior, z)
    sigma2 = prior.arch.decoder_variance
    recon = float(np.mean(-((batch - out) ** 2).sum(axis=1) / (2.0 * sigma2)))
    kl_terms = 0.5 * (mu * mu + var - np.log(var) - 1.0).sum(axis=1)
    kl = max(float(np.mean(kl_terms)), 0.0)
    return ElboReport(reconstruction=recon, kl=kl, elbo=recon - kl)


def elbo(prior: VaePrior, batch: np.ndarray, rng: np.random.Generator) -> ElboReport:
    """Single-sample bound with fresh reparameterization noise."""
    batch = np.asarray(batch, dtype=float)
    xi = rng.standard_normal((batch.shape[0], prior.arch.latent_dim))
    return elbo_given_noise(prior, batch, xi)


def elbo_gradients(
    prior: VaePrior, batch: np.ndarray, xi: np.ndarray
) -> tuple[ElboReport, dict[str, np.ndarray]]:
    """Value and exact ascent gradients of the fixed-noise bound.

    Backpropagates the reconstruction term through the decoder and the
    reparameterized z into the encoder, and adds the closed-form KL
    gradients d/dmu = mu, d/dvar = (1 - 1/var) / 2 on the encoder heads.
    """
    p = prior.params
    act = prior.arch.hidden_activation
    batch = np.asarray(batch, dtype=float)
    n = batch.shape[0]
    sigma2 = prior.arch.decoder_variance

    he_pre, he, mu, var_pre, var = _encode_batch(prior, batch)
    sd = np.sqrt(var)
    z = mu + sd * xi
    hd_pre, hd, out = _decode_batch(prior, z)

    recon = float(np.mean(-((batch - out) ** 2).sum(axis=1) / (2.0 * sigma2)))
    kl_terms = 0.5 * (mu * mu + var - np.log(var) - 1.0).sum(axis=1)
    kl = max(float(np.mean(kl_terms)), 0.0)
    report = ElboReport(reconstruction=recon, kl=kl, elbo=recon - kl)

    scale = 1.0 / n
    d_out_pre = ((batch - out) / sigma2 * scale) * out * (1.0 - out)
    g = {
        "dec_wout": d_out_pre.T @ hd,
        "dec_bout": d_out_pre.sum(axis=0),
    }
    d_hd_pre = (d_out_pre @ p["dec_wout"]) * _hidden_grad(hd_pre, hd, act)
    g["dec_w1"] = d_hd_pre.T @ z
    g["dec_b1"] = d_hd_pre.sum(axis=0)

    d_z = d_hd_pre @ p["dec_w1"]
    d_mu = d_z - mu * scale
    d_var = d_z * xi / (2.0 * sd) - 0.5 * (1.0 - 1.0 / var) * scale
    d_var_pre = d_var * (var_pre > 0.0)

    g["enc_wmu"] = d_mu.T @ he
    g["enc_bmu"] = d_mu.sum(axis=0)
    g["enc_wvar"] = d_var_pre.T @ he
    g["enc_bvar"] = d_var_pre.sum(axis=0)

    d_he_pre = (d_mu @ p["enc_wmu"] + d_var_pre @ p["enc_wvar"]) * _hidden_grad(
        he_pre, he, act
    )
    g["enc_w1"] = d_he_pre.T @ batch
    g["enc_b1"] = d_he_pre.sum(axis=0)
    return report, g


def train_step(
    prior: VaePrior, batch: np.ndarray, rng: np.random.Generator
) -> ElboReport:
    """One fixed-step gradient ascent update on a fresh single-noise bound."""
    batch = np.asarray(batch, dtype=float)
    xi = rng.standard_normal((batch.shape[0], prior.arch.latent_dim))
    report, grads = elbo_gradients(prior, batch, xi)
    if prior.step_size != 0.0:
        for name, grad in grads.items():
            prior.params[name] += prior.step_size * grad
    prior.train_steps += 1
    return report


def sample_action(prior: VaePrior, rng: np.random.Generator) -> np.ndarray:
    """Decode one latent drawn from N(0, I); always inside (0, 1)^d."""
    z = rng.standard_normal(prior.arch.latent_dim)
    return decode(prior, z)


def sample_actions(prior: VaePrior, n: int, rng: np.random.Generator) -> np.ndarray:
    """Decode ``n`` latents drawn from N(0, I); shape (n, input_dim)."""
    z = rng.standard_normal((n, prior.arch.latent_dim))
    _, _, out = _decode_batch(prior, z)
    return out


def save_weights(prior: VaePrior, out: IO[str]) -> None:
    """Plain-text snapshot: one (name, shape, row-major values) block per array."""
    a = prior.arch
    out.write("brdm-vae v1\n")
    out.write(
        f"arch {a.input_dim} {a.hidden_dim} {a.latent_dim} "
        f"{repr(a.decoder_variance)} {a.hidden_activation}\n"
    )
    out.write(f"step_size {repr(prior.step_size)}\n")
    out.write(f"train_steps {prior.train_steps}\n")
    for name in _PARAM_NAMES:
        arr = prior.params[name]
        dims = " ".join(str(s) for s in arr.shape)
        out.write(f"{name} {dims}\n")
        out.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")


def load_weights(src: IO[str]) -> VaePrior:
    """Rebuild a prior from a snapshot written by :func:`save_weights`."""
    header = src.readline().strip()
    if header != "brdm-vae v1":
        raise ValueError(f"unrecognized weight snapshot header: {header!r}")
    fields = src.readline().split()
    arch = VaeArch(
        input_dim=int(fields[1]),
        hidden_dim=int(fields[2]),
        latent_dim=int(fields[3]),
        decoder_variance=float(fields[4]),
        hidden_activation=fields[5],
    )
    step_size = float(src.readline().split()[1])
    train_steps = int(src.readline().split()[1])
    params: dict[str, np.ndarray] = {}
    for line in src:
        head = line.split()
        if not head:
            continue
        name, dims = head[0], tuple(int(d) for d in head[1:])
        values = np.array([float(v) for v in src.readline().split()])
        params[name] = values.reshape(dims)
    missing = set(_PARAM_NAMES) - set(params)
    if missing:
        raise ValueError(f"weight snapshot missing arrays: {sorted(missing)}")
    return VaePrior(arch=arch, params=params, step_size=step_size, train_steps=train_steps)
