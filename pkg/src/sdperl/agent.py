"""PPO agent with transformer actor and critic over the slot sequence.

Both networks read the padded slot sequence plus one appended all-zero
readout token. Attention is masked so that

* the readout token sees the filled slots and itself,
* filled slots see each other but neither padding nor the readout token,
* padding slots see only themselves,

which makes the outputs exactly independent of whatever sits in the padding.
The readout token's final hidden state feeds a small MLP head: the action
mean for the actor, the state value for the critic. Actions are diagonal
Gaussians with a learned, state-independent log standard deviation.

Gradients come from torch autograd; everything runs in float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

DTYPE = torch.float64
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
LOG_2PI = math.log(2 * math.pi)


@dataclass
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    learning_rate: float = 3e-4
    vf_coef: float = 0.5
    ent_coef: float = 0.0
    n_epochs: int = 10
    episodes_per_rollout: int = 10
    batch_size: int = 64
    max_grad_norm: float = 0.5
    normalize_advantage: bool = True
    log_std_init: float = 0.0
    n_layers: int = 4
    n_heads: int = 4
    hidden_dim: int = 16
    ffn_dim: int = 64
    adam_eps: float = 1e-5


def attention_mask(n_filled: torch.Tensor, capacity: int) -> torch.Tensor:
    """Boolean ``(B, T, T)`` mask, True where query ``i`` may attend to key ``j``.

    ``T = capacity + 1``; the readout token sits at index ``capacity``.
    """
    T = capacity + 1
    idx = torch.arange(T)
    filled = idx[None, :] < n_filled[:, None]  # (B, T) key is a filled slot
    eye = torch.eye(T, dtype=torch.bool)[None]
    is_readout = (idx == capacity)[None, :, None]
    query_filled = filled[:, :, None]
    # filled queries -> filled keys; readout -> filled keys; everyone -> self
    allowed = (query_filled | is_readout) & filled[:, None, :]
    return allowed | eye


class _Block(nn.Module):
    def __init__(self, hidden, heads, ffn):
        super().__init__()
        if hidden % heads:
            raise ValueError("hidden_dim must be divisible by n_heads")
        self.heads = heads
        self.ln1 = nn.LayerNorm(hidden, dtype=DTYPE)
        self.qkv = nn.Linear(hidden, 3 * hidden, dtype=DTYPE)
        self.proj = nn.Linear(hidden, hidden, dtype=DTYPE)
        self.ln2 = nn.LayerNorm(hidden, dtype=DTYPE)
        self.ff1 = nn.Linear(hidden, ffn, dtype=DTYPE)
        self.ff2 = nn.Linear(ffn, hidden, dtype=DTYPE)

    def forward(self, x, mask):
        B, T, H = x.shape
        dh = H // self.heads
        q, k, v = self.qkv(self.ln1(x)).split(H, dim=-1)
        q, k, v = (t.view(B, T, self.heads, dh).transpose(1, 2) for t in (q, k, v))
        scores = q @ k.transpose(-2, -1) / math.sqrt(dh)
        scores = scores.masked_fill(~mask[:, None], float("-inf"))
        att = torch.softmax(scores, dim=-1) @ v
        x = x + self.proj(att.transpose(1, 2).reshape(B, T, H))
        return x + self.ff2(nn.functional.gelu(self.ff1(self.ln2(x))))


class SlotTransformer(nn.Module):
    """Pre-norm transformer encoder with a readout token and an MLP head."""

    def __init__(self, slot_dim, capacity, out_dim, hidden=16, layers=4, heads=4, ffn=64):
        super().__init__()
        self.slot_dim = slot_dim
        self.capacity = capacity
        self.embed = nn.Linear(slot_dim, hidden, dtype=DTYPE)
        self.pos = nn.Parameter(torch.zeros(capacity + 1, hidden, dtype=DTYPE))
        self.blocks = nn.ModuleList(_Block(hidden, heads, ffn) for _ in range(layers))
        self.norm = nn.LayerNorm(hidden, dtype=DTYPE)
        self.head = nn.Sequential(
            nn.Linear(hidden, hidden, dtype=DTYPE), nn.Tanh(), nn.Linear(hidden, out_dim, dtype=DTYPE)
        )

    def init_weights(self, generator: torch.Generator, out_gain: float):
        for name, p in self.named_parameters():
            if name == "pos":
                nn.init.normal_(p, std=0.02, generator=generator)
            elif name.endswith("bias"):
                nn.init.zeros_(p)
            elif ".ln" in name or name.startswith("norm"):
                nn.init.ones_(p)
            elif p.dim() == 2:
                nn.init.orthogonal_(p, gain=math.sqrt(2), generator=generator)
        nn.init.orthogonal_(self.head[-1].weight, gain=out_gain, generator=generator)

    def forward(self, slots: torch.Tensor, n_filled: torch.Tensor) -> torch.Tensor:
        B, M, D = slots.shape
        if M != self.capacity or D != self.slot_dim:
            raise ValueError(f"state has shape ({M}, {D}); expected ({self.capacity}, {self.slot_dim})")
        tokens = torch.cat([slots, slots.new_zeros(B, 1, D)], dim=1)
        x = self.embed(tokens) + self.pos
        mask = attention_mask(n_filled, M)
        for block in self.blocks:
            x = block(x, mask)
        return self.head(self.norm(x[:, -1]))


class ActorCritic(nn.Module):
    def __init__(self, slot_dim: int, capacity: int, action_dim: int, cfg: PPOConfig = PPOConfig(),
                 seed: int = 0):
        super().__init__()
        arch = dict(hidden=cfg.hidden_dim, layers=cfg.n_layers, heads=cfg.n_heads, ffn=cfg.ffn_dim)
        self.actor = SlotTransformer(slot_dim, capacity, action_dim, **arch)
        self.critic = SlotTransformer(slot_dim, capacity, 1, **arch)
        self.log_std = nn.Parameter(torch.full((action_dim,), cfg.log_std_init, dtype=DTYPE))
        gen = torch.Generator().manual_seed(int(seed))
        self.actor.init_weights(gen, out_gain=0.01)
        self.critic.init_weights(gen, out_gain=1.0)

    @property
    def action_dim(self) -> int:
        return self.log_std.shape[0]

    def clamped_log_std(self) -> torch.Tensor:
        return self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def value(self, slots, n_filled) -> torch.Tensor:
        return self.critic(slots, n_filled).squeeze(-1)

    def log_prob(self, slots, n_filled, actions) -> torch.Tensor:
        mean = self.actor(slots, n_filled)
        return gaussian_log_prob(actions, mean, self.clamped_log_std())

    def entropy(self) -> torch.Tensor:
        return (self.clamped_log_std() + 0.5 * (1.0 + LOG_2PI)).sum()


def gaussian_log_prob(x, mean, log_std):
    z = (x - mean) * torch.exp(-log_std)
    return -0.5 * (z * z).sum(-1) - log_std.sum() - 0.5 * mean.shape[-1] * LOG_2PI


def sample_action(mean, log_std, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Draw from ``N(mean, exp(log_std)^2)`` and return the exact log-density."""
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.clip(np.asarray(log_std, dtype=np.float64), LOG_STD_MIN, LOG_STD_MAX)
    noise = rng.standard_normal(mean.shape)
    action = mean + np.exp(log_std) * noise
    log_prob = -0.5 * float(noise @ noise) - float(log_std.sum()) - 0.5 * len(mean) * LOG_2PI
    return action, log_prob


def compute_gae(rewards, values, dones, gamma=0.99, lam=0.95, last_value=0.0):
    """Generalised advantage estimates and returns.

    ``dones[t]`` marks that step ``t`` ended its episode, so nothing is
    bootstrapped past it. ``last_value`` is the value of the state after the
    final step (ignored when that step is terminal).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    n = len(rewards)
    if not len(values) == len(dones) == n:
        raise ValueError("rewards, values and dones must have equal length")
    adv = np.zeros(n)
    last = 0.0
    for t in reversed(range(n)):
        next_value = values[t + 1] if t + 1 < n else last_value
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
    return adv, adv + values


class RolloutBuffer:
    def __init__(self):
        self.slots: list[np.ndarray] = []
        self.n_filled: list[int] = []
        self.actions: list[np.ndarray] = []
        self.log_probs: list[float] = []
        self.values: list[float] = []
        self.rewards: list[float] = []
        self.dones: list[bool] = []
        self.advantages: np.ndarray | None = None
        self.returns: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.rewards)

    def add(self, slots, n_filled, action, log_prob, value, reward, done):
        self.slots.append(np.array(slots, dtype=np.float64))
        self.n_filled.append(int(n_filled))
        self.actions.append(np.array(action, dtype=np.float64))
        self.log_probs.append(float(log_prob))
        self.values.append(float(value))
        self.rewards.append(float(reward))
        self.dones.append(bool(done))

    def finish(self, gamma: float, lam: float, normalize: bool = True) -> None:
        adv, ret = compute_gae(self.rewards, self.values, self.dones, gamma, lam)
        self.returns = ret
        if normalize and len(adv) > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        self.advantages = adv

    def tensors(self, idx) -> dict[str, torch.Tensor]:
        if self.advantages is None:
            raise RuntimeError("call finish() before reading training batches")
        idx = np.asarray(idx)
        return {
            "slots": torch.from_numpy(np.stack([self.slots[i] for i in idx])),
            "n_filled": torch.tensor([self.n_filled[i] for i in idx]),
            "actions": torch.from_numpy(np.stack([self.actions[i] for i in idx])),
            "old_log_probs": torch.tensor([self.log_probs[i] for i in idx], dtype=DTYPE),
            "advantages": torch.from_numpy(self.advantages[idx]),
            "returns": torch.from_numpy(self.returns[idx]),
        }


def ppo_loss(model: ActorCritic, batch: dict, clip_range: float, vf_coef: float, ent_coef: float):
    """Clipped-surrogate PPO loss plus diagnostics (as detached floats)."""
    log_prob = model.log_prob(batch["slots"], batch["n_filled"], batch["actions"])
    ratio = torch.exp(log_prob - batch["old_log_probs"])
    adv = batch["advantages"]
    surrogate = torch.min(ratio * adv, ratio.clamp(1 - clip_range, 1 + clip_range) * adv)
    policy_loss = -surrogate.mean()
    value_loss = ((model.value(batch["slots"], batch["n_filled"]) - batch["returns"]) ** 2).mean()
    entropy = model.entropy()
    loss = policy_loss + vf_coef * value_loss - ent_coef * entropy
    with torch.no_grad():
        log_ratio = log_prob - batch["old_log_probs"]
        info = {
            "policy_loss": policy_loss.item(),
            "value_loss": value_loss.item(),
            "entropy": entropy.item(),
            "clip_fraction": float(((ratio - 1).abs() > clip_range).double().mean()),
            "approx_kl": float(((ratio - 1) - log_ratio).mean()),
        }
    return loss, info


class PPOAgent:
    def __init__(self, slot_dim: int, capacity: int, action_dim: int, cfg: PPOConfig = PPOConfig(),
                 seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.model = ActorCritic(slot_dim, capacity, action_dim, cfg, seed)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=cfg.learning_rate,
                                          eps=cfg.adam_eps)

    @torch.no_grad()
    def act(self, slots: np.ndarray, n_filled: int, rng: np.random.Generator):
        """Sample an action for one state: returns ``(action, log_prob, value)``."""
        s = torch.from_numpy(np.asarray(slots, dtype=np.float64))[None]
        n = torch.tensor([n_filled])
        mean = self.model.actor(s, n)[0].numpy()
        value = float(self.model.value(s, n)[0])
        action, log_prob = sample_action(mean, self.model.log_std.detach().numpy(), rng)
        return action, log_prob, value

    def update(self, buffer: RolloutBuffer, rng: np.random.Generator) -> dict:
        return ppo_update(self.model, self.optimizer, buffer, self.cfg, rng)

    def save(self, path, extra: dict | None = None) -> None:
        save_checkpoint(self.model, self.cfg, path, extra)

    def load(self, path) -> dict:
        return load_checkpoint(self.model, path)


def ppo_update(model: ActorCritic, optimizer, buffer: RolloutBuffer, cfg: PPOConfig,
               rng: np.random.Generator) -> dict:
    """Run ``n_epochs`` passes of shuffled minibatch updates over ``buffer``."""
    if buffer.advantages is None:
        buffer.finish(cfg.gamma, cfg.gae_lambda, cfg.normalize_advantage)
    n = len(buffer)
    batch_size = min(cfg.batch_size, n)
    stats = {"loss": [], "policy_loss": [], "value_loss": [], "entropy": [],
             "clip_fraction": [], "approx_kl": []}
    for _ in range(cfg.n_epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = buffer.tensors(order[start:start + batch_size])
            loss, info = ppo_loss(model, batch, cfg.clip_range, cfg.vf_coef, cfg.ent_coef)
            if not torch.isfinite(loss):
                raise FloatingPointError(f"non-finite PPO loss; diagnostics {info}")
            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()
            stats["loss"].append(loss.item())
            for key, val in info.items():
                stats[key].append(val)
    return {key: float(np.mean(vals)) for key, vals in stats.items()}


def save_checkpoint(model: ActorCritic, cfg: PPOConfig, path, extra: dict | None = None) -> None:
    state = model.state_dict()
    doc = {
        "hyperparameters": asdict(cfg),
        "shapes": {k: list(v.shape) for k, v in state.items()},
        "params": {k: v.detach().reshape(-1).tolist() for k, v in state.items()},
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(model: ActorCritic, path) -> dict:
    """Load parameters saved by :func:`save_checkpoint`; shapes must match exactly."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    state = model.state_dict()
    if set(doc["shapes"]) != set(state):
        raise ValueError("checkpoint parameter names do not match the model")
    new_state = {}
    for name, tensor in state.items():
        if list(tensor.shape) != doc["shapes"][name]:
            raise ValueError(f"{name}: checkpoint shape {doc['shapes'][name]} != model {list(tensor.shape)}")
        new_state[name] = torch.tensor(doc["params"][name], dtype=DTYPE).reshape(tensor.shape)
    model.load_state_dict(new_state)
    return doc
