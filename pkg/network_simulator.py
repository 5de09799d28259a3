#!/usr/bin/env python3
"""
Network Simulator Module
Motor de eventos discretos em slots: topologia, apagamentos i.i.d., propagação
de RTT/2 e entrega de feedback (fim-a-fim ou salto-a-salto)
Projeto: AC-RLNC Multipath Simulator
"""

import hashlib
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from metrics_collector import DeliveryRecord, SessionTrace

logger = logging.getLogger(__name__)


class TopologyError(ValueError):
    """Violação de invariante da topologia"""


class FeedbackMode(Enum):
    """Modo de confirmação"""
    END_TO_END = "end_to_end"
    HOP_BY_HOP = "hop_by_hop"


class Verdict(Enum):
    """ACK ou NACK"""
    ACK = "ack"
    NACK = "nack"


@dataclass
class Topology:
    """
    Grade H×P de probabilidades de apagamento, RTT em slots e modo de feedback.

    eps[h, p] é a probabilidade de apagamento do enlace p no salto h (índices a partir de 0).
    """
    eps: np.ndarray
    rtt_slots: int
    feedback_mode: FeedbackMode = FeedbackMode.END_TO_END

    def __post_init__(self):
        try:
            self.eps = np.array(self.eps, dtype=float)
        except ValueError as e:
            raise TopologyError(f"Matriz de apagamentos irregular: {str(e)}") from e
        if isinstance(self.feedback_mode, str):
            self.feedback_mode = FeedbackMode(self.feedback_mode)
        self.validate()

    @classmethod
    def from_path_rows(cls, rows: Sequence[Sequence[float]], rtt_slots: int,
                       feedback_mode: FeedbackMode = FeedbackMode.END_TO_END) -> 'Topology':
        """Cria a topologia a partir da matriz P×H (linhas = caminhos, colunas = saltos)"""
        return cls(np.array(rows, dtype=float).T, rtt_slots, feedback_mode)

    @classmethod
    def single_hop(cls, eps: Sequence[float], rtt_slots: int) -> 'Topology':
        """Rede multipath de um salto"""
        return cls(np.array([list(eps)], dtype=float), rtt_slots)

    def validate(self):
        """Valida as invariantes; a mensagem nomeia a restrição violada"""
        if self.eps.ndim != 2 or self.eps.size == 0:
            raise TopologyError(f"eps deve ser uma matriz H×P não vazia, recebido formato {self.eps.shape}")
        if np.any(self.eps < 0.0) or np.any(self.eps > 1.0) or np.any(np.isnan(self.eps)):
            raise TopologyError("Todas as probabilidades de apagamento devem estar em [0, 1]")
        if not isinstance(self.rtt_slots, (int, np.integer)) or self.rtt_slots <= 0:
            raise TopologyError(f"rtt_slots deve ser inteiro positivo, recebido {self.rtt_slots}")
        if self.rtt_slots % 2 != 0:
            raise TopologyError(f"rtt_slots deve ser par, recebido {self.rtt_slots}")
        if self.rtt_slots < 2 * self.H:
            raise TopologyError(f"rtt_slots >= 2H exigido (rtt={self.rtt_slots}, H={self.H})")
        if self.rtt_slots % (2 * self.H) != 0:
            raise TopologyError(
                f"Latência por salto não inteira: rtt={self.rtt_slots} não é múltiplo de 2H={2 * self.H}"
            )

    @property
    def H(self) -> int:
        return int(self.eps.shape[0])

    @property
    def P(self) -> int:
        return int(self.eps.shape[1])

    @property
    def rates(self) -> np.ndarray:
        return 1.0 - self.eps

    @property
    def hop_latency(self) -> int:
        """Latência de ida por salto: rtt/(2H)"""
        return self.rtt_slots // (2 * self.H)

    @property
    def per_hop_rtt(self) -> int:
        return self.rtt_slots // self.H

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return {
            'eps': self.eps.tolist(),
            'rtt_slots': self.rtt_slots,
            'feedback_mode': self.feedback_mode.value,
            'H': self.H,
            'P': self.P,
        }


@dataclass
class ReceiverReport:
    """Fotografia do receptor anexada ao feedback"""
    decoded_prefix: int = 0
    rank: int = 0


@dataclass
class InFlight:
    """
    Pacote em trânsito em um enlace.

    lineage = (slot, caminho) da transmissão do emissor cujo conteúdo o pacote
    carrega; None para pacotes gerados só a partir dos buffers de um nó.
    """
    pkt: Any
    hop: int
    path: int
    send_slot: int
    arrive_slot: int
    erased: bool
    lineage: Optional[Tuple[int, int]] = None

    @property
    def source_path(self) -> int:
        """Caminho de origem no emissor (o próprio enlace se não houver linhagem)"""
        return self.lineage[1] if self.lineage is not None else self.path


@dataclass
class FeedbackMsg:
    """Confirmação entregue ao nó de origem após um RTT (total ou por salto)"""
    about_seq: int
    verdict: Verdict
    path: int
    send_slot: int
    deliver_slot: int
    report: ReceiverReport = field(default_factory=ReceiverReport)
    origin: int = 0

    @property
    def is_ack(self) -> bool:
        return self.verdict is Verdict.ACK


def sample_erasure(rng: np.random.Generator, eps_ph: float) -> bool:
    """Sorteia um apagamento BEC com probabilidade eps_ph"""
    return bool(rng.random() < eps_ph)


class ErasurePattern:
    """
    Realização de apagamentos fixada por (salto, slot, caminho).
    Transmissões sem entrada caem no sorteio normal.
    """

    def __init__(self, forced: Optional[Dict[Tuple[int, int, int], bool]] = None):
        self.forced = dict(forced or {})

    @classmethod
    def from_sequence(cls, outcomes: Sequence[bool], paths: int,
                      hop: int = 0, start_slot: int = 0) -> 'ErasurePattern':
        """
        Constrói o padrão a partir de uma sequência de transmissões em ordem (slot, caminho)

        Args:
            outcomes: True = apagado, na ordem das transmissões
            paths: Número de caminhos por slot
        """
        forced = {}
        for n, erased in enumerate(outcomes):
            slot, path = divmod(n, paths)
            forced[(hop, start_slot + slot, path)] = bool(erased)
        return cls(forced)

    def lookup(self, hop: int, slot: int, path: int) -> Optional[bool]:
        return self.forced.get((hop, slot, path))


@dataclass
class SlotEvents:
    """Eventos de um slot: chegadas por nó receptor e feedbacks entregues"""
    slot: int
    arrivals: Dict[int, List[InFlight]] = field(default_factory=dict)
    erasures: Dict[int, List[InFlight]] = field(default_factory=dict)
    feedback: List[FeedbackMsg] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not (self.arrivals or self.erasures or self.feedback)


class NetworkSimulator:
    """
    Mundo da simulação: relógio de slots, canais em trânsito e feedback.

    O nó 0 é o emissor, os nós 1..H-1 são intermediários e o nó H é o receptor.
    O salto h liga o nó h ao nó h+1.
    """

    def __init__(self, topology: Topology, rng: np.random.Generator,
                 erasure_pattern: Optional[ErasurePattern] = None):
        self.topology = topology
        self.rng = rng
        self.erasure_pattern = erasure_pattern or ErasurePattern()
        self.now = -1

        self._arrivals: Dict[int, List[InFlight]] = defaultdict(list)
        self._feedback: Dict[int, List[FeedbackMsg]] = defaultdict(list)
        self._source_positions: Dict[Tuple[int, int], InFlight] = {}
        self._current: Dict[int, List[InFlight]] = {}
        self._digest = hashlib.md5()
        self.sent_count = 0
        self.feedback_count = 0

    def advance_slot(self) -> SlotEvents:
        """Avança o relógio e entrega chegadas e feedbacks do novo slot"""
        self.now += 1
        events = SlotEvents(slot=self.now)

        in_flight = self._arrivals.pop(self.now, [])
        self._current = defaultdict(list)
        for flight in in_flight:
            node = flight.hop + 1
            self._current[node].append(flight)
            bucket = events.erasures if flight.erased else events.arrivals
            bucket.setdefault(node, []).append(flight)

        events.feedback = self._feedback.pop(self.now, [])
        return events

    def transmit(self, hop: int, path: int, pkt: Any,
                 lineage: Optional[Tuple[int, int]] = None) -> InFlight:
        """
        Coloca um pacote no enlace (hop, path); o apagamento é sorteado no envio

        Args:
            hop: Salto (0 = saída do emissor)
            path: Caminho no salto
            pkt: Pacote com atributo seq_id
            lineage: Transmissão do emissor carregada pelo pacote (ignorado no salto 0,
                onde a linhagem é a própria posição)
        """
        if hop == 0:
            lineage = (self.now, path)
        forced = self.erasure_pattern.lookup(hop, self.now, path)
        erased = forced if forced is not None else sample_erasure(self.rng, self.topology.eps[hop, path])
        flight = InFlight(pkt=pkt, hop=hop, path=path, send_slot=self.now,
                          arrive_slot=self.now + self.topology.hop_latency, erased=erased,
                          lineage=lineage)
        self._arrivals[flight.arrive_slot].append(flight)
        self.sent_count += 1

        if hop == 0 and self.topology.feedback_mode is FeedbackMode.END_TO_END:
            self._source_positions[lineage] = flight

        self._digest.update(f"{self.now},{hop},{path},{getattr(pkt, 'seq_id', -1)},{int(erased)};".encode())
        return flight

    def settle(self, reporters: Dict[int, Callable[[int], ReceiverReport]]):
        """
        Gera os feedbacks referentes às chegadas do slot corrente

        No modo fim-a-fim o emissor recebe o veredito do receptor e os nós
        intermediários recebem o estado dos seus enlaces de saída; no modo
        salto-a-salto todo nó recebe o do próximo nó.

        Args:
            reporters: nó -> função(caminho) que devolve o ReceiverReport após a ingestão
        """
        topology = self.topology
        end_to_end = topology.feedback_mode is FeedbackMode.END_TO_END
        if end_to_end:
            self._settle_source(reporters[topology.H])

        for node, flights in self._current.items():
            if end_to_end and node == 1:
                continue
            reporter = reporters.get(node)
            for flight in flights:
                verdict = Verdict.NACK if flight.erased else Verdict.ACK
                report = reporter(flight.path) if reporter else ReceiverReport()
                self._schedule_feedback(flight, verdict, report,
                                        flight.send_slot + topology.per_hop_rtt, origin=node - 1)

    def _settle_source(self, reporter: Callable[[int], ReceiverReport]):
        """ACK só se alguma chegada íntegra ao receptor carrega a transmissão do emissor"""
        topology = self.topology
        send_slot = self.now - topology.rtt_slots // 2
        delivered = {flight.lineage for flight in self._current.get(topology.H, [])
                     if not flight.erased and flight.lineage is not None}
        for path in range(topology.P):
            flight = self._source_positions.pop((send_slot, path), None)
            if flight is None:
                continue
            verdict = Verdict.ACK if flight.lineage in delivered else Verdict.NACK
            self._schedule_feedback(flight, verdict, reporter(path),
                                    send_slot + topology.rtt_slots, origin=0)

    def _schedule_feedback(self, flight: InFlight, verdict: Verdict, report: ReceiverReport,
                           deliver_slot: int, origin: int):
        msg = FeedbackMsg(about_seq=getattr(flight.pkt, 'seq_id', -1), verdict=verdict,
                          path=flight.path, send_slot=flight.send_slot, deliver_slot=deliver_slot,
                          report=ReceiverReport(report.decoded_prefix, report.rank), origin=origin)
        self._feedback[deliver_slot].append(msg)
        self.feedback_count += 1

    @property
    def digest(self) -> str:
        """Hash md5 do traço de transmissões e apagamentos"""
        return self._digest.hexdigest()

    @property
    def idle(self) -> bool:
        return not self._arrivals and not self._feedback


class SourceEndpoint(Protocol):
    counters: Dict[str, int]
    first_send_slots: Dict[int, int]

    def on_feedback(self, msg: FeedbackMsg, slot: int): ...

    def transmissions(self, slot: int) -> List[Tuple[int, Any]]: ...


class RelayEndpoint(Protocol):
    def on_arrivals(self, slot: int, arrivals: List[InFlight]): ...

    def on_feedback(self, msg: FeedbackMsg, slot: int): ...

    def transmissions(self, slot: int) -> List[Tuple[int, Any, Optional[Tuple[int, int]]]]:
        """(caminho de saída, pacote, linhagem) por transmissão"""

    def report(self, path: int) -> ReceiverReport: ...


class SinkEndpoint(Protocol):
    in_order_slots: Dict[int, int]
    per_path_delivered: List[int]

    @property
    def delivered(self) -> int: ...

    def on_arrivals(self, slot: int, arrivals: List[InFlight]): ...

    def report(self, path: int) -> ReceiverReport: ...


class SlotLoop:
    """Laço de eventos de uma sessão: emissor, nós intermediários e receptor"""

    def __init__(self, network: NetworkSimulator, source: SourceEndpoint, sink: SinkEndpoint,
                 packet_count: int, relays: Optional[Dict[int, RelayEndpoint]] = None,
                 max_slots: Optional[int] = None):
        self.network = network
        self.source = source
        self.sink = sink
        self.relays = relays or {}
        self.packet_count = packet_count
        topology = network.topology
        self.max_slots = max_slots or 100 * (packet_count + topology.rtt_slots)

        missing = [h for h in range(1, topology.H) if h not in self.relays]
        if missing:
            raise TopologyError(f"Nós intermediários sem endpoint: {missing}")

    def run(self) -> SessionTrace:
        """Executa até entregar todos os pacotes ou esgotar max_slots"""
        network = self.network
        topology = network.topology
        receiver = topology.H
        reporters = {receiver: self.sink.report}
        reporters.update({h: relay.report for h, relay in self.relays.items()})
        no_feedback_slots = 0

        while self.sink.delivered < self.packet_count and network.now + 1 < self.max_slots:
            events = network.advance_slot()
            slot = events.slot

            source_feedback = 0
            for msg in events.feedback:
                if msg.origin == 0:
                    self.source.on_feedback(msg, slot)
                    source_feedback += 1
                else:
                    self.relays[msg.origin].on_feedback(msg, slot)
            if source_feedback == 0:
                no_feedback_slots += 1

            self.sink.on_arrivals(slot, events.arrivals.get(receiver, []))
            for h in range(1, receiver):
                self.relays[h].on_arrivals(slot, events.arrivals.get(h, []))
            network.settle(reporters)

            for h in range(1, receiver):
                for path, pkt, lineage in self.relays[h].transmissions(slot):
                    network.transmit(h, path, pkt, lineage)
            for path, pkt in self.source.transmissions(slot):
                network.transmit(0, path, pkt)

        complete = self.sink.delivered >= self.packet_count
        if not complete:
            logger.warning(f"Sessão interrompida em {network.now + 1} slots: "
                           f"{self.sink.delivered}/{self.packet_count} entregues")

        records = [
            DeliveryRecord(raw_index=index,
                           first_send_slot=self.source.first_send_slots[index],
                           in_order_slot=slot)
            for index, slot in sorted(self.sink.in_order_slots.items())
            if index <= self.packet_count
        ]
        return SessionTrace(
            records=records,
            packet_count=self.packet_count,
            rtt=topology.rtt_slots,
            paths=topology.P,
            slots_run=network.now + 1,
            per_path_delivered=list(self.sink.per_path_delivered),
            no_feedback_slots=no_feedback_slots,
            counters=dict(self.source.counters),
            complete=complete,
            digest=network.digest,
        )
