"""Reinforcement-learning trainers built on the opponent-model encoders."""
from .a2c import A2CConfig, ActorCritic, a2c_loss, entropy, sample_actions
from .agents import (
    EvalResult,
    OMDDPGAgent,
    RandomAgent,
    ScriptedAgent,
    SMA2CAgent,
    evaluate_policy,
    run_lockstep,
)
from .buffer import ReplayBuffer, hard_update, polyak_update
from .ddpg import DDPG, DDPGConfig, DDPGNetworks, gumbel_softmax
from .gae import gae_advantages
from .omddpg import OMDDPGTrainer
from .sma2c import SMA2CTrainer, build_sma2c_agent
