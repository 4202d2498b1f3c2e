from .base import (
    AccessCounter,
    ConfigurationError,
    ContractError,
    JointStep,
    MarkovGame,
    OpponentPool,
    ScriptedOpponent,
    UnsupportedError,
)
from .matrix_game import (
    COOPERATE,
    DEFECT,
    PD_OPPONENTS,
    AlwaysCooperate,
    AlwaysDefect,
    GrimTrigger,
    RepeatedMatrixGame,
    TitForTat,
    optimal_return_oracle,
    prisoners_dilemma_payoff,
)
from .speaker_listener import Speaker, SpeakerListener, speaker_pool
from .trajectory import (
    EpisodeRecord,
    LocalTrajectory,
    OpponentTrajectory,
    load_jsonl,
    random_policy,
    record_pool,
    record_trajectories,
    run_episode,
    save_jsonl,
)


def pd_pool(train=("pd/always_defect", "pd/tit_for_tat"), test=("pd/always_cooperate", "pd/grim_trigger")) -> OpponentPool:
    try:
        return OpponentPool(train=[PD_OPPONENTS[i]() for i in train], test=[PD_OPPONENTS[i]() for i in test])
    except KeyError as exc:
        raise ConfigurationError(f"unknown matrix-game opponent {exc.args[0]!r}") from None


def make_env(cfg: dict):
    """Build (env, pool) from the ``env`` section of an experiment config."""
    kind = cfg["id"]
    horizon = int(cfg.get("horizon", 25))
    if kind == "prisoners_dilemma":
        p = cfg.get("payoff", {})
        payoff = prisoners_dilemma_payoff(p.get("T", 5.0), p.get("R", 3.0), p.get("P", 1.0), p.get("S", 0.0))
        env = RepeatedMatrixGame(payoff, horizon=horizon)
        pool = pd_pool(cfg.get("train_opponents", ("pd/always_defect", "pd/tit_for_tat")),
                       cfg.get("test_opponents", ("pd/always_cooperate", "pd/grim_trigger")))
        return env, pool
    if kind == "speaker_listener":
        n_colors = int(cfg.get("n_colors", 4))
        env = SpeakerListener(n_colors=n_colors, grid_size=int(cfg.get("grid_size", 5)), horizon=horizon)
        pool = speaker_pool(n_colors, int(cfg.get("n_train", 5)), int(cfg.get("n_test", 5)), int(cfg.get("pool_seed", 0)))
        return env, pool
    raise ConfigurationError(f"unknown environment id {kind!r}")
