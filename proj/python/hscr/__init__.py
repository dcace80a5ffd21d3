"""Python surface of the self-contrastive preference pipeline."""

from ._hscr import (  # noqa: F401
    BOS,
    EOS,
    VOCAB_SIZE,
    Model,
    __version__,
    contrast_distribution,
    dpo_pair_loss,
    generate_dispreferred,
    hscr_loss,
    implicit_reward,
    log_sigmoid,
    make_corpus,
    rerank_select,
    sft_train,
    similarity,
    softmax,
    token_name,
    visual_features,
)
