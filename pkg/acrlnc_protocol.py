#!/usr/bin/env python3
"""
AC-RLNC Protocol Module
Máquinas de estado do emissor e do receptor AC-RLNC multipath: FEC a priori,
critério de FB-FEC pela lacuna de DoF, limite de tamanho da janela
Projeto: AC-RLNC Multipath Simulator
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Deque, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from bit_filling import AllocationProblem, Partition, bit_fill
from network_simulator import FeedbackMsg, InFlight, ReceiverReport
from rlnc_codec import CodedPacket, DecoderState, PacketKind, encode_window

logger = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    """Inconsistência entre o emissor e o simulador"""


class PacketDecision(Enum):
    """Decisão de escalonamento de um caminho em um slot"""
    SIZE_LIMIT_REPEAT = "size_limit"
    FEC = "fec"
    FBFEC = "fbfec"
    NEW = "new"
    EW_FEC = "ew_fec"

    @property
    def kind(self) -> PacketKind:
        return _DECISION_KINDS[self]

    @property
    def counter(self) -> str:
        """Nome do contador exportado por iteração"""
        return "fec" if self is PacketDecision.EW_FEC else self.value


_DECISION_KINDS = {
    PacketDecision.SIZE_LIMIT_REPEAT: PacketKind.END_WINDOW_REPEAT,
    PacketDecision.FEC: PacketKind.FEC,
    PacketDecision.EW_FEC: PacketKind.FEC,
    PacketDecision.FBFEC: PacketKind.FBFEC,
    PacketDecision.NEW: PacketKind.NEW,
}

COUNTER_NAMES = ("new", "fec", "fbfec", "size_limit")


class FeedbackStatus(Enum):
    PENDING = "pending"
    ACKED = "acked"
    NACKED = "nacked"


def round_half_away(x: float) -> int:
    """Arredondamento ao inteiro mais próximo, empates para longe de zero"""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass
class SenderConfig:
    """Parâmetros do emissor AC-RLNC"""
    paths: int
    rtt: int
    th: float = 0.0
    o_bar: Optional[int] = None
    rate_prior: float = 0.5
    rate_estimator: str = "full"
    horizon: Optional[int] = None
    fec_enabled: bool = True
    fbfec_enabled: bool = True

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError(f"paths deve ser >= 1, recebido {self.paths}")
        if self.rtt < 2:
            raise ValueError(f"rtt deve ser >= 2, recebido {self.rtt}")
        if self.o_bar is not None and self.o_bar < 1:
            raise ValueError(f"o_bar deve ser >= 1, recebido {self.o_bar}")
        if self.rate_estimator not in ("full", "windowed"):
            raise ValueError(f"Estimador desconhecido: {self.rate_estimator}")

    @property
    def k(self) -> int:
        """Pacotes novos por janela: P·(RTT−1)"""
        return self.paths * (self.rtt - 1)

    @property
    def window_limit(self) -> int:
        """ō; por padrão 2k"""
        return self.o_bar if self.o_bar is not None else 2 * self.k

    @property
    def estimator_horizon(self) -> int:
        return self.horizon if self.horizon is not None else 20 * self.rtt

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return {
            'paths': self.paths,
            'rtt': self.rtt,
            'th': self.th,
            'o_bar': self.window_limit,
            'k': self.k,
            'rate_prior': self.rate_prior,
            'rate_estimator': self.rate_estimator,
            'fec_enabled': self.fec_enabled,
            'fbfec_enabled': self.fbfec_enabled,
        }


@dataclass
class SentRecord:
    """Entrada do registro de envios"""
    seq_id: int
    path: int
    slot: int
    decision: PacketDecision
    w_min: int
    w_max: int
    status: FeedbackStatus = FeedbackStatus.PENDING

    @property
    def is_new(self) -> bool:
        return self.decision is PacketDecision.NEW


def estimate_rates(history: Iterable[Tuple[int, bool]], paths: int, prior: float = 0.5) -> np.ndarray:
    """
    Estima r_p = 1 − NACKs/feedbacks por caminho sobre todo o histórico

    Args:
        history: Pares (caminho, ack)
        paths: Número de caminhos
        prior: Taxa assumida antes do primeiro feedback

    Returns:
        Vetor de taxas por caminho
    """
    totals = np.zeros(paths, dtype=float)
    nacks = np.zeros(paths, dtype=float)
    for path, ack in history:
        totals[path] += 1
        if not ack:
            nacks[path] += 1
    return _rates_from_counts(totals, nacks, prior)


def _rates_from_counts(totals: np.ndarray, nacks: np.ndarray, prior: float) -> np.ndarray:
    rates = np.full(len(totals), prior, dtype=float)
    seen = totals > 0
    rates[seen] = 1.0 - nacks[seen] / totals[seen]
    return rates


class RateEstimator:
    """Estimador incremental de taxa por caminho (histórico completo ou janela)"""

    def __init__(self, paths: int, prior: float = 0.5, horizon: Optional[int] = None):
        self.paths = paths
        self.prior = prior
        self.horizon = horizon
        self.totals = np.zeros(paths, dtype=float)
        self.nacks = np.zeros(paths, dtype=float)
        self._recent: Deque[Tuple[int, int, bool]] = deque()

    def observe(self, path: int, ack: bool, slot: int = 0):
        self.totals[path] += 1
        if not ack:
            self.nacks[path] += 1
        if self.horizon is not None:
            self._recent.append((slot, path, ack))
            while self._recent and self._recent[0][0] <= slot - self.horizon:
                old_slot, old_path, old_ack = self._recent.popleft()
                self.totals[old_path] -= 1
                if not old_ack:
                    self.nacks[old_path] -= 1

    def rates(self) -> np.ndarray:
        return _rates_from_counts(self.totals, self.nacks, self.prior)


@dataclass
class DofSnapshot:
    """DoFs faltantes e adicionados, razão d e lacuna Δ"""
    md1: float
    md2: float
    ad1: float
    ad2: float
    d: float
    delta: float
    infinite_ratio: bool = False

    @property
    def md_g(self) -> float:
        return self.md1 + self.md2

    @property
    def ad_g(self) -> float:
        return self.ad1 + self.ad2

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return {
            'md1': self.md1, 'md2': self.md2, 'ad1': self.ad1, 'ad2': self.ad2,
            'md_g': self.md_g, 'ad_g': self.ad_g, 'd': self.d, 'delta': self.delta,
            'infinite_ratio': self.infinite_ratio,
        }


class SenderState:
    """
    Estado do emissor: janela deslizante [w_min, w_max], contadores m_p,
    registro de envios e estimativas de taxa.

    Um registro pertence ao conjunto de pacotes que dependem de informação
    não decodificada enquanto seu w_max excede o último prefixo informado.
    """

    def __init__(self, config: SenderConfig, stream_size: Optional[int] = None,
                 stream_available: Optional[Callable[[], bool]] = None):
        self.config = config
        self.stream_size = stream_size
        self.stream_available = stream_available
        self.w_min = 1
        self.w_max = 0
        self.next_seq = 0
        self.m = np.zeros(config.paths, dtype=int)
        self.new_since_ew = 0
        self.size_limited = False
        self.eow_flag = False
        self.reported_prefix = 0
        self.reported_rank = 0
        self.sent_log: Dict[int, SentRecord] = {}
        self.retired_seq = -1
        horizon = config.estimator_horizon if config.rate_estimator == "windowed" else None
        self.estimator = RateEstimator(config.paths, config.rate_prior, horizon)
        self.counters: Dict[str, int] = {name: 0 for name in COUNTER_NAMES}

    @property
    def window_span(self) -> int:
        return max(0, self.w_max - self.w_min + 1)

    @property
    def window_empty(self) -> bool:
        return self.w_max < self.w_min

    @property
    def stream_exhausted(self) -> bool:
        if self.stream_size is not None and self.w_max >= self.stream_size:
            return True
        return self.stream_available is not None and not self.stream_available()

    def rates(self) -> np.ndarray:
        return self.estimator.rates()

    def log_transmission(self, path: int, slot: int, decision: PacketDecision) -> SentRecord:
        """Registra um envio sobre a janela corrente"""
        record = SentRecord(seq_id=self.next_seq, path=path, slot=slot, decision=decision,
                            w_min=self.w_min, w_max=self.w_max)
        self.sent_log[record.seq_id] = record
        self.next_seq += 1
        self.counters[decision.counter] += 1
        return record

    def prune(self):
        """Descarta registros que já não dependem de pacotes não decodificados"""
        # w_max é não decrescente em seq_id, então os descartados formam um prefixo
        while self.sent_log:
            seq_id = next(iter(self.sent_log))
            if self.sent_log[seq_id].w_max > self.reported_prefix:
                break
            del self.sent_log[seq_id]
            self.retired_seq = seq_id


def compute_dof(state: SenderState, rates: Optional[np.ndarray] = None) -> DofSnapshot:
    """
    Calcula md_g, ad_g, d e Δ sobre os registros ainda não decodificados

    Args:
        state: Estado do emissor
        rates: Taxas por caminho (padrão: estimativa corrente)

    Returns:
        DofSnapshot; ad_g = 0 com md_g > 0 marca infinite_ratio e Δ = +∞
    """
    rates = state.rates() if rates is None else np.asarray(rates, dtype=float)
    eps = 1.0 - rates
    P = state.config.paths
    th = state.config.th

    md1 = ad1 = 0.0
    pending_new = np.zeros(P, dtype=float)
    pending_rep = np.zeros(P, dtype=float)
    for record in state.sent_log.values():
        if record.w_max <= state.reported_prefix:
            continue
        if record.is_new:
            if record.status is FeedbackStatus.NACKED:
                md1 += 1
            elif record.status is FeedbackStatus.PENDING:
                pending_new[record.path] += 1
        else:
            if record.status is FeedbackStatus.ACKED:
                ad1 += 1
            elif record.status is FeedbackStatus.PENDING:
                pending_rep[record.path] += 1

    md2 = float(np.dot(eps, pending_new))
    ad2 = float(np.dot(rates, pending_rep))
    md_g = md1 + md2
    ad_g = ad1 + ad2

    if ad_g > 0:
        d = md_g / ad_g
        delta = P * (d - 1.0 - th)
        return DofSnapshot(md1, md2, ad1, ad2, d, delta)
    if md_g > 0:
        return DofSnapshot(md1, md2, ad1, ad2, math.inf, math.inf, infinite_ratio=True)
    return DofSnapshot(md1, md2, ad1, ad2, 0.0, -P * (1.0 + th))


def fbfec_needed(snapshot: DofSnapshot) -> bool:
    """Retransmissão se e somente se Δ > 0"""
    return snapshot.delta > 0


def schedule_slot(state: SenderState, slot: int,
                  allocator: Callable[[AllocationProblem], Partition] = bit_fill) -> List[SentRecord]:
    """
    Decide o que cada caminho transmite no slot, na ordem de prioridade:
    limite de tamanho, FEC pendente, FB-FEC por bit-filling, pacotes novos
    e, ao fim da janela, FEC a priori nos caminhos restantes.

    Args:
        state: Estado do emissor (feedbacks do slot já aplicados)
        slot: Slot corrente
        allocator: Solução da partição New/FB-FEC

    Returns:
        Registros dos envios do slot
    """
    config = state.config
    P = config.paths
    state.eow_flag = False

    if state.size_limited and state.reported_prefix >= state.w_max:
        state.size_limited = False
    if not state.window_empty and state.window_span >= config.window_limit:
        state.size_limited = True

    if state.size_limited:
        return [state.log_transmission(p, slot, PacketDecision.SIZE_LIMIT_REPEAT) for p in range(P)]

    rates = state.rates()
    decisions: Dict[int, PacketDecision] = {}
    free = list(range(P))

    if not state.window_empty:
        if config.fec_enabled:
            for p in free:
                if state.m[p] > 0:
                    decisions[p] = PacketDecision.FEC
                    state.m[p] -= 1
            free = [p for p in free if p not in decisions]

        if config.fbfec_enabled and free:
            snapshot = compute_dof(state, rates)
            if fbfec_needed(snapshot):
                partition = allocator(AllocationProblem(
                    rates=tuple(rates[p] for p in free), delta=snapshot.delta, paths=tuple(free)))
                for p in partition.fbfec_paths:
                    decisions[p] = PacketDecision.FBFEC
                free = [p for p in free if p not in decisions]
                logger.debug(f"Slot {slot}: Δ={snapshot.delta:.3f}, FB-FEC em {partition.fbfec_paths}")

    records: List[SentRecord] = []
    for p, decision in sorted(decisions.items()):
        records.append(state.log_transmission(p, slot, decision))

    # Pacotes novos nos caminhos mais rápidos primeiro
    remaining = sorted(free, key=lambda p: (-rates[p], p))
    position = 0
    while position < len(remaining):
        p = remaining[position]
        position += 1

        if state.stream_exhausted:
            if not state.window_empty:
                records.append(state.log_transmission(p, slot, PacketDecision.SIZE_LIMIT_REPEAT))
            continue
        if state.window_span >= config.window_limit:
            records.append(state.log_transmission(p, slot, PacketDecision.SIZE_LIMIT_REPEAT))
            continue

        state.w_max += 1
        records.append(state.log_transmission(p, slot, PacketDecision.NEW))
        state.new_since_ew += 1

        if state.new_since_ew >= config.k:
            state.new_since_ew = 0
            state.eow_flag = True
            if config.fec_enabled:
                eps = 1.0 - rates
                state.m = np.array([max(0, round_half_away(e * (config.rtt - 1))) for e in eps], dtype=int)
                logger.debug(f"Slot {slot}: fim de janela, m = {state.m.tolist()}")
                tail = []
                for q in remaining[position:]:
                    if state.m[q] > 0:
                        state.m[q] -= 1
                        records.append(state.log_transmission(q, slot, PacketDecision.EW_FEC))
                    else:
                        tail.append(q)
                remaining = remaining[:position] + tail

    return records


def on_feedback(state: SenderState, msg: FeedbackMsg, slot: Optional[int] = None):
    """
    Aplica um ACK/NACK: status do envio, estimativa de taxa, prefixo informado e w_min

    Raises:
        ProtocolError: seq_id desconhecido ou entrega fora do slot
    """
    if slot is not None and msg.deliver_slot != slot:
        raise ProtocolError(f"Feedback de seq {msg.about_seq} entregue no slot {slot}, "
                            f"esperado {msg.deliver_slot}")
    if msg.about_seq < 0 or msg.about_seq >= state.next_seq:
        raise ProtocolError(f"Feedback para seq_id desconhecido: {msg.about_seq}")

    state.estimator.observe(msg.path, msg.is_ack, msg.deliver_slot)

    record = state.sent_log.get(msg.about_seq)
    if record is None and msg.about_seq > state.retired_seq:
        raise ProtocolError(f"Feedback para seq_id desconhecido: {msg.about_seq}")
    if record is not None:
        record.status = FeedbackStatus.ACKED if msg.is_ack else FeedbackStatus.NACKED

    if msg.report.decoded_prefix > state.reported_prefix:
        state.reported_prefix = msg.report.decoded_prefix
    state.reported_rank = max(state.reported_rank, msg.report.rank)
    state.w_min = max(state.w_min, state.reported_prefix + 1)
    state.prune()


class MpAcrlncSender:
    """
    Emissor AC-RLNC como endpoint da simulação: escalona, codifica e registra
    o primeiro envio de cada pacote bruto.
    """

    def __init__(self, config: SenderConfig, packet_count: Optional[int], rng: np.random.Generator,
                 raw: Optional[Dict[int, np.ndarray]] = None,
                 stream_available: Optional[Callable[[], bool]] = None,
                 on_new_packet: Optional[Callable[[int, int], None]] = None,
                 allocator: Callable[[AllocationProblem], Partition] = bit_fill):
        self.config = config
        self.state = SenderState(config, stream_size=packet_count, stream_available=stream_available)
        self.rng = rng
        self.raw = raw
        self.on_new_packet = on_new_packet
        self.allocator = allocator
        self.first_send_slots: Dict[int, int] = {}

    @property
    def counters(self) -> Dict[str, int]:
        return self.state.counters

    def on_feedback(self, msg: FeedbackMsg, slot: int):
        on_feedback(self.state, msg, slot)

    def transmissions(self, slot: int) -> List[Tuple[int, CodedPacket]]:
        """Pacotes a transmitir no slot, um por caminho ativo"""
        out = []
        for record in schedule_slot(self.state, slot, self.allocator):
            if record.is_new:
                self.first_send_slots.setdefault(record.w_max, slot)
                if self.on_new_packet is not None:
                    self.on_new_packet(record.w_max, slot)
            pkt = encode_window(self.raw, (record.w_min, record.w_max), self.rng,
                                seq_id=record.seq_id, kind=record.decision.kind,
                                path=record.path, send_slot=slot)
            out.append((record.path, pkt))
        return out


class SpAcrlncSender(MpAcrlncSender):
    """AC-RLNC de caminho único: a máquina multipath restrita a P = 1"""

    def __init__(self, rtt: int, packet_count: Optional[int], rng: np.random.Generator, **kwargs):
        config_keys = ('th', 'o_bar', 'rate_prior', 'rate_estimator', 'horizon', 'fec_enabled', 'fbfec_enabled')
        config = SenderConfig(paths=1, rtt=rtt, **{k: kwargs.pop(k) for k in config_keys if k in kwargs})
        super().__init__(config, packet_count, rng, **kwargs)


class AcrlncReceiver:
    """Receptor: decodificador com prefixo em ordem e instante de entrega por pacote"""

    def __init__(self, paths: int, keep_payload: bool = False):
        self.decoder = DecoderState(keep_payload=keep_payload)
        self.in_order_slots: Dict[int, int] = {}
        self.per_path_delivered = [0] * paths

    @property
    def delivered(self) -> int:
        return self.decoder.decoded_prefix

    def on_arrivals(self, slot: int, arrivals: Sequence[InFlight]):
        for flight in arrivals:
            before = self.decoder.decoded_prefix
            report = self.decoder.ingest(flight.pkt)
            if report.newly_in_order:
                for index in range(before + 1, report.decoded_prefix + 1):
                    self.in_order_slots[index] = slot
                self.per_path_delivered[flight.path] += report.newly_in_order

    def report(self, path: int = 0) -> ReceiverReport:
        return ReceiverReport(decoded_prefix=self.decoder.decoded_prefix, rank=self.decoder.rank)
