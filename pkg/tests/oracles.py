"""Independent reference implementations shared by the unit and acceptance tests."""

import itertools

import numpy as np
import torch

from sdperl.agent import ActorCritic, PPOConfig


def brute_auc(labels, scores):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p, q in itertools.product(pos, neg):
        total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


TOY = PPOConfig(hidden_dim=4, n_layers=1, n_heads=2, ffn_dim=8)


def toy_model(seed=0, slot_dim=3, capacity=2, action_dim=2):
    model = ActorCritic(slot_dim, capacity, action_dim, TOY, seed=seed)
    gen = torch.Generator().manual_seed(seed + 100)
    with torch.no_grad():
        # move away from the structured init so every parameter matters
        for p in model.parameters():
            p.add_(0.3 * torch.randn(p.shape, generator=gen, dtype=p.dtype))
    return model


def toy_batch(model, n=6, seed=0):
    rng = np.random.default_rng(seed)
    slots = torch.from_numpy(rng.standard_normal((n, 2, 3)))
    n_filled = torch.from_numpy(rng.integers(0, 3, n))
    slots[n_filled == 0] = 0.0
    slots[n_filled == 1, 1] = 0.0
    actions = torch.from_numpy(rng.standard_normal((n, model.action_dim)))
    with torch.no_grad():
        old = model.log_prob(slots, n_filled, actions) + torch.from_numpy(rng.normal(0, 0.1, n))
    return {"slots": slots, "n_filled": n_filled, "actions": actions, "old_log_probs": old,
            "advantages": torch.from_numpy(rng.standard_normal(n)),
            "returns": torch.from_numpy(rng.standard_normal(n))}


def param_grads(model):
    return [torch.zeros_like(p) if p.grad is None else p.grad.clone() for p in model.parameters()]


def finite_difference_errors(model, objective, n_probes=200, h=1e-4, seed=0):
    """Relative errors between autograd and central differences on random scalar probes."""
    params = [p for p in model.parameters()]
    model.zero_grad()
    objective().backward()
    grads = param_grads(model)
    sizes = np.array([p.numel() for p in params])
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(n_probes):
        k = int(rng.choice(len(params), p=sizes / sizes.sum()))
        j = int(rng.integers(sizes[k]))
        flat = params[k].data.view(-1)
        orig = flat[j].item()
        with torch.no_grad():
            flat[j] = orig + h
            up = objective().item()
            flat[j] = orig - h
            down = objective().item()
            flat[j] = orig
        fd = (up - down) / (2 * h)
        ad = grads[k].view(-1)[j].item()
        errors.append(abs(fd - ad) / max(abs(fd), abs(ad), 1e-6))
    return np.array(errors)


def silhouette_loop(points, labels):
    """Per-point silhouette by direct loops; singletons score 0."""
    ks = np.unique(labels)
    d = np.sqrt(((points[:, None] - points[None]) ** 2).sum(-1))
    out = []
    for i in range(len(points)):
        same = labels == labels[i]
        if same.sum() == 1:
            out.append(0.0)
            continue
        a = d[i, same].sum() / (same.sum() - 1)
        b = min(d[i, labels == j].mean() for j in ks if j != labels[i])
        out.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return float(np.mean(out))
