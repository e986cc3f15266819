"""gradkit: token transition graphs fused with model logits at decode time.

Build a sparse weighted graph by accumulating next-token logits over a
corpus in a single pass, then steer greedy decoding by adding max-normalized
graph-retrieved logits to the model's logits.
"""

from .bridge import BridgeClient
from .decoder import (
    DecoderConfig,
    StepTrace,
    fuse_and_select,
    generate,
    max_normalize,
    retrieve_graph_logits,
)
from .errors import GradKitError
from .graph import (
    GraphStats,
    TransitionGraph,
    accumulate_sequence,
    build_graph,
    load_graph,
    merge_graphs,
    save_graph,
    stats,
)
from .harness import (
    EvalReport,
    SyntheticBenchmark,
    generate_benchmark,
    run_eval,
    sweep_alpha,
    sweep_corpus,
)
from .sources import (
    MaxAnchoredSource,
    ReplaySource,
    ToyBigramModel,
    fit_toy_model,
    load_replay,
    next_logits,
    transition_scores,
)
from .vocab import (
    BOS_ID,
    EOS_ID,
    UNK_ID,
    Vocab,
    build_vocab,
    detokenize,
    encode_prompt,
    tokenize,
)

__version__ = "0.1.0"
