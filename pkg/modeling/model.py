"""Full model: encoder, transition graph, turn-level heads and decoder."""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import ModelConfig
from corpus.dataset import SEEKER, STRATEGY_INDEX, SUPPORTER
from corpus.windows import Example, TransitionWindow
from errors import ContractError
from modeling.decoder import Decoder, DecoderInputs, generation_loss
from modeling.encoder import ContextEncoding, Encoder, flatten_context
from modeling.heads import HeadOutputs, Heads, StateDeltas, bow_keyword_loss, emotion_loss, semantics_deltas, strategy_loss
from modeling.transition_graph import (
    EMO, SEM, STRAT, TransitionGraph, TransitThenInteract, build_graph, init_states, transit_then_interact,
)
from numerics import tensor as T
from numerics.layers import Embedding, Module
from numerics.tensor import Tensor
from providers.base import OREACT, XREACT
from providers.knowledge import build_provider

logger = logging.getLogger(__name__)

LOSS_NAMES = ("gen", "sem", "str", "emo")


@dataclass
class ContextState:
    """Everything computed from the dialogue history, before decoding."""
    example: Example
    encoding: ContextEncoding
    graph: TransitionGraph
    updated: TransitionGraph
    deltas: StateDeltas
    heads: HeadOutputs
    decoder_inputs: DecoderInputs
    keyword_sets: List[List[int]] = field(default_factory=list)
    strategy_golds: List[Optional[str]] = field(default_factory=list)
    emotion_golds: List[Optional[str]] = field(default_factory=list)

    @property
    def strategy_probs(self) -> np.ndarray:
        """Predicted distribution for the response placeholder."""
        return T.softmax(self.heads.strategy_logits, axis=-1).data[-1]


@dataclass
class ForwardOutput:
    context: ContextState
    logits: Tensor
    gold_next: List[int]
    losses: Dict[str, Tensor]


class TurnStateModel(Module):
    def __init__(self, config: ModelConfig, vocab_size: int, special_ids: Dict[str, int], seed: int = 0):
        self.config = config
        self.vocab_size = vocab_size
        self.cls_id = special_ids["cls"]
        self.pad_id = special_ids["pad"]
        self.bos_id = special_ids["bos"]
        self.eos_id = special_ids["eos"]
        rng = np.random.default_rng(seed)
        self.rng = rng

        d = config.d_model
        self.token_embedding = Embedding(vocab_size, d, rng)
        self.encoder = Encoder(d, config.encoder_layers, config.encoder_heads, config.hidden_dim,
                               config.max_len, self.cls_id, self.pad_id, rng, config.dropout)
        self.transition = TransitThenInteract(d, config.graph_heads, rng)
        self.heads = Heads(d, vocab_size, rng)
        self.decoder = Decoder(d, config.decoder_layers, config.decoder_heads, config.emotion_heads,
                               config.hidden_dim, config.max_target_len, vocab_size, rng,
                               tie_output=config.tie_output_projection, dropout_rate=config.dropout)
        self.knowledge = build_provider(config.knowledge_provider, d, rng, config.knowledge_path)
        self.gold_strategy = Embedding(len(STRATEGY_INDEX), d, rng) if config.strategy_teacher_forcing else None

    @property
    def state_kinds(self) -> List[str]:
        cfg = self.config
        flags = ((SEM, cfg.use_semantics_transition), (STRAT, cfg.use_strategy_transition),
                 (EMO, cfg.use_emotion_transition))
        return [kind for kind, enabled in flags if enabled]

    def _window_after_truncation(self, window: TransitionWindow, dropped: int) -> TransitionWindow:
        turns = [(t, s) for t, s in window.node_turns if t >= dropped]
        return TransitionWindow(start_index=max(window.start_index, dropped), end_index=window.end_index,
                                node_turns=turns)

    def encode(self, example: Example) -> ContextState:
        """Encoder, graph update and heads for one example."""
        if not example.history:
            raise ContractError(f"{example.dialogue_id}: example has no history")
        ids, _, dropped = flatten_context([u.tokens for u in example.history], self.cls_id, self.config.max_len)
        encoding = self.encoder(ids, self.token_embedding)

        window = self._window_after_truncation(example.window, dropped)
        graph = build_graph(window, kinds=self.state_kinds)
        graph.edge_type_embeddings = self.transition.edge_type_embeddings
        end = len(encoding.cls_positions) - 1
        rows = [t - dropped for t, _ in window.history_turns] + [end]
        init_states(graph, encoding.cls_states[rows], lambda t: self.knowledge(example, t, XREACT))

        if self.config.use_transit_then_interact:
            updated = transit_then_interact(graph, self.transition)
        else:
            updated = graph
        deltas = semantics_deltas(graph.states[SEM], updated.states[SEM])
        heads = self.heads(deltas, updated.states.get(STRAT), updated.states.get(EMO))

        keyword_sets, strategy_golds, emotion_golds = [], [], []
        for node in graph.nodes:
            is_response = node.turn_index == window.end_index
            utterance = example.target if is_response else example.history[node.turn_index]
            if is_response:
                keyword_sets.append(list(utterance.keywords) if self.config.bow_on_response else [])
            else:
                keyword_sets.append(list(utterance.keywords))
            if node.speaker == SUPPORTER:
                strategy_golds.append(utterance.strategy)
            else:
                emotion_golds.append(utterance.emotion)

        context = ContextState(example, encoding, graph, updated, deltas, heads,
                               decoder_inputs=None, keyword_sets=keyword_sets,
                               strategy_golds=strategy_golds, emotion_golds=emotion_golds)
        context.decoder_inputs = self._decoder_inputs(context)
        return context

    def _strategy_state(self, context: ContextState) -> Optional[Tensor]:
        if STRAT not in self.state_kinds:
            return None
        if self.gold_strategy is None:
            return context.updated.states[STRAT][-1]
        gold = context.example.target.strategy
        if self.training and gold is not None:
            return self.gold_strategy(STRATEGY_INDEX[gold])
        return self.gold_strategy(int(np.argmax(context.strategy_probs)))

    def _emotion_sequence(self, context: ContextState) -> Optional[Tensor]:
        if EMO not in self.state_kinds:
            return None
        updated = context.updated
        emo_rows = updated.row_of(EMO)
        rows = []
        for node in updated.nodes[:-1]:
            if node.speaker == SEEKER:
                rows.append(updated.states[EMO][emo_rows[node.turn_index]])
            else:
                rows.append(self.knowledge(context.example, node.turn_index, OREACT))
        return T.stack(rows) if rows else None

    def _decoder_inputs(self, context: ContextState) -> DecoderInputs:
        return DecoderInputs(
            target_embeddings=None,
            strat_hat=self._strategy_state(context),
            memory=context.encoding.token_states,
            memory_mask=context.encoding.key_mask,
            emo_sequence=self._emotion_sequence(context),
            sem_delta=context.deltas.delta[-1] if SEM in self.state_kinds else None,
        )

    def decode(self, context: ContextState, input_ids: Sequence[int]) -> Tensor:
        """Vocabulary logits [len(input_ids), |V|] for a BOS-initial prefix."""
        inputs = replace(context.decoder_inputs,
                         target_embeddings=self.decoder.embed(input_ids, self.token_embedding))
        return self.decoder(inputs, self.token_embedding)

    def target_ids(self, example: Example):
        """(decoder inputs, gold next tokens): BOS y1..yM and y1..yM EOS."""
        body = list(example.target.tokens)[: self.config.max_target_len - 1]
        return [self.bos_id] + body, body + [self.eos_id]

    def forward(self, example: Example) -> ForwardOutput:
        context = self.encode(example)
        input_ids, gold_next = self.target_ids(example)
        logits = self.decode(context, input_ids)
        return ForwardOutput(context, logits, gold_next, self.losses(context, logits, gold_next))

    def losses(self, context: ContextState, logits: Tensor, gold_next: Sequence[int]) -> Dict[str, Tensor]:
        kinds = self.state_kinds
        heads = context.heads
        zero = Tensor(0.0)
        emotion_supervised = heads.emotion_logits is not None and EMO in kinds
        return {
            "gen": generation_loss(logits, gold_next, self.pad_id),
            "sem": bow_keyword_loss(heads.keyword_logits, context.keyword_sets, self.config.bow_normalize)
            if SEM in kinds else zero,
            "str": strategy_loss(heads.strategy_logits, context.strategy_golds) if STRAT in kinds else zero,
            "emo": emotion_loss(heads.emotion_logits, context.emotion_golds) if emotion_supervised else zero,
        }
