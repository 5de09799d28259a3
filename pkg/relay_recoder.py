#!/usr/bin/env python3
"""
Relay Recoder Module
Recodificação nos nós intermediários: mistura seletiva, recodificação por
caminho global e encaminhamento sem recodificação
Projeto: AC-RLNC Multipath Simulator
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from network_simulator import FeedbackMsg, InFlight, ReceiverReport
from path_matching import LinkRateTracker, NodeMatcher
from rlnc_codec import CodedPacket, EchelonBasis, PacketKind

logger = logging.getLogger(__name__)

REMATCH_MIN_SAMPLES = 20


class RecodeMode(Enum):
    """Política de recodificação do nó"""
    SELECTIVE_MIX = "selective_mix"
    PER_PATH = "per_path"
    FORWARD_ONLY = "forward_only"


@dataclass
class RelayBuffers:
    """
    Buffers de recodificação de um nó.

    Na mistura seletiva há um buffer para pacotes novos e outro para reparos
    (FEC, FB-FEC e repetições); na recodificação por caminho, um por caminho global.
    """
    paths: int
    new: EchelonBasis = field(default_factory=EchelonBasis)
    repair: EchelonBasis = field(default_factory=EchelonBasis)
    per_path: List[EchelonBasis] = field(default_factory=list)
    w_min_seen: int = 1
    next_seq: int = 0

    def __post_init__(self):
        if not self.per_path:
            self.per_path = [EchelonBasis() for _ in range(self.paths)]

    def store(self, pkt: CodedPacket, path: int, mode: RecodeMode):
        """Guarda uma chegada no buffer correspondente ao modo"""
        if pkt.w_min > self.w_min_seen:
            self.w_min_seen = pkt.w_min
            self.prune()
        if mode is RecodeMode.SELECTIVE_MIX:
            basis = self.new if pkt.kind.is_new else self.repair
        else:
            basis = self.per_path[path]
        basis.insert(pkt.w_min, pkt.coeffs, pkt.payload)

    def prune(self):
        """Descarta linhas de janelas já encerradas pelo emissor"""
        for basis in [self.new, self.repair] + self.per_path:
            basis.prune_below(self.w_min_seen)


def _emit(buffers: RelayBuffers, basis: EchelonBasis, kind: PacketKind, path: int,
          slot: int, rng: np.random.Generator) -> Optional[CodedPacket]:
    combined = basis.combine(rng)
    if combined is None:
        return None
    lo, hi, coeffs, payload = combined
    pkt = CodedPacket(seq_id=buffers.next_seq, w_min=lo, w_max=hi, coeffs=coeffs,
                      kind=kind, path=path, send_slot=slot, payload=payload)
    buffers.next_seq += 1
    return pkt


def node_recode(buffers: RelayBuffers, arrivals: Sequence[InFlight], mode: RecodeMode,
                rng: np.random.Generator, slot: int = 0) -> List[Optional[object]]:
    """
    Gera os P pacotes de saída do nó no slot

    Args:
        buffers: Buffers do nó
        arrivals: Chegadas não apagadas do slot
        mode: Política de recodificação
        rng: Gerador dos coeficientes de recodificação
        slot: Slot corrente

    Returns:
        Lista com um pacote (ou None) por caminho de saída
    """
    by_path: Dict[int, InFlight] = {flight.path: flight for flight in arrivals}
    out: List[Optional[object]] = [None] * buffers.paths

    if mode is RecodeMode.FORWARD_ONLY:
        for path, flight in by_path.items():
            out[path] = flight.pkt
        return out

    for flight in arrivals:
        buffers.store(flight.pkt, flight.path, mode)

    for path in range(buffers.paths):
        flight = by_path.get(path)
        if mode is RecodeMode.PER_PATH:
            kind = flight.pkt.kind if flight is not None else PacketKind.FEC
            out[path] = _emit(buffers, buffers.per_path[path], kind, path, slot, rng)
            continue

        # Novos só se misturam com novos, reparos só com reparos
        if flight is not None:
            if flight.pkt.kind.is_new:
                out[path] = _emit(buffers, buffers.new, PacketKind.NEW, path, slot, rng)
            else:
                out[path] = _emit(buffers, buffers.repair, flight.pkt.kind, path, slot, rng)
        else:
            out[path] = (_emit(buffers, buffers.new, PacketKind.NEW, path, slot, rng)
                         or _emit(buffers, buffers.repair, PacketKind.FEC, path, slot, rng))
    return out


class RelayNode:
    """
    Nó intermediário como endpoint da simulação (um pacote por caminho por slot).

    Cada chegada no enlace de entrada i sai pelo enlace local[i] do NodeMatcher.
    As taxas de saída são estimadas pelo feedback dos próprios enlaces e o
    casamento só é refeito quando a ordem estimada muda.
    """

    def __init__(self, hop: int, paths: int, mode: RecodeMode, rng: np.random.Generator,
                 rates: Optional[Sequence[float]] = None,
                 upstream_order: Optional[Callable[[], np.ndarray]] = None,
                 prior: float = 0.5, horizon: Optional[int] = None,
                 min_samples: int = REMATCH_MIN_SAMPLES):
        """
        Args:
            rates: Taxas conhecidas dos enlaces de saída na montagem (None = todas iguais)
            upstream_order: Ordem dos enlaces de entrada anunciada pelo nó anterior
            prior: Taxa assumida para enlaces ainda sem feedback
            horizon: Janela da estimativa de taxas em slots (None = histórico completo)
            min_samples: Feedbacks por enlace antes de refazer o casamento
        """
        self.hop = hop
        self.mode = mode
        self.rng = rng
        self.buffers = RelayBuffers(paths)
        self.tracker = LinkRateTracker(paths, prior, horizon, min_samples)
        self.matcher = NodeMatcher(hop, rates if rates is not None else np.full(paths, 0.5))
        self.upstream_order = upstream_order or (lambda: np.arange(paths))
        self.matcher.match(self.upstream_order())
        self.rematches = 0
        self._pending: List[InFlight] = []

    @property
    def order(self) -> np.ndarray:
        """Ordem dos enlaces de saída, repassada ao próximo nó"""
        return self.matcher.order

    def on_arrivals(self, slot: int, arrivals: List[InFlight]):
        self._pending = list(arrivals)

    def on_feedback(self, msg: FeedbackMsg, slot: int):
        self.tracker.observe(msg.path, msg.is_ack, slot)
        if self.tracker.reordered() and self.matcher.update_rates(self.tracker.rates()):
            self.rematches += 1
            logger.debug(f"Nó {self.hop}: casamento refeito no slot {slot}: {self.matcher.local.tolist()}")

    def _follow_upstream(self):
        upstream = np.asarray(self.upstream_order(), dtype=int)
        if not np.array_equal(upstream, self.matcher.upstream_order):
            self.matcher.match(upstream)

    def transmissions(self, slot: int) -> List[tuple]:
        self._follow_upstream()
        local = self.matcher.local
        routed = [replace(flight, path=int(local[flight.path])) for flight in self._pending]
        self._pending = []
        lineage = {flight.path: flight.lineage for flight in routed}
        outgoing = node_recode(self.buffers, routed, self.mode, self.rng, slot)
        # Enlace sem chegada no slot só envia recombinação dos buffers, sem linhagem
        return [(path, pkt, lineage.get(path)) for path, pkt in enumerate(outgoing) if pkt is not None]

    def report(self, path: int = 0) -> ReceiverReport:
        return ReceiverReport()
