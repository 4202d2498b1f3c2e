from .model import (
    INPUT_MASKS,
    OpponentDecoder,
    OpponentModel,
    PosteriorSequence,
    RecurrentEncoder,
    build_local_step,
    encode_opponent,
    encode_self,
    local_inputs,
    opponent_inputs,
)
from .losses import discrimination, kl_sequence, om_vae_loss, reconstruction_nll, sample_latents, self_vae_loss
from .pretrain import DataError, TripletSampler, VAEConfig, pretrain_om_vae, reconstruction_accuracy
