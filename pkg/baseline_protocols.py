#!/usr/bin/env python3
"""
Baseline Protocols Module
Protocolos de referência: SR-ARQ por caminho (fim-a-fim e salto-a-salto),
instâncias SP AC-RLNC independentes por caminho e o melhor caminho global único
Projeto: AC-RLNC Multipath Simulator
"""

import dataclasses
import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Deque, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from acrlnc_protocol import AcrlncReceiver, SenderConfig, SpAcrlncSender
from network_simulator import FeedbackMsg, InFlight, ReceiverReport, Topology

logger = logging.getLogger(__name__)


class StreamSupply:
    """Fluxo global de pacotes brutos 1..packet_count entregue sob demanda"""

    def __init__(self, packet_count: Optional[int]):
        self.packet_count = packet_count
        self.issued = 0

    def available(self) -> bool:
        return self.packet_count is None or self.issued < self.packet_count

    def take(self) -> int:
        if not self.available():
            raise RuntimeError("Fluxo de pacotes esgotado")
        self.issued += 1
        return self.issued


class InOrderTracker:
    """Entrega em ordem sobre o fluxo global mesclado"""

    def __init__(self, paths: int):
        self.received: Set[int] = set()
        self.prefix = 0
        self.in_order_slots: Dict[int, int] = {}
        self.per_path_delivered = [0] * paths

    def mark(self, index: int, slot: int, path: int):
        if index <= self.prefix:
            return
        self.received.add(index)
        before = self.prefix
        while self.prefix + 1 in self.received:
            self.prefix += 1
            self.in_order_slots[self.prefix] = slot
            self.received.discard(self.prefix)
        self.per_path_delivered[path] += self.prefix - before


class StreamDispatcher:
    """
    Atribui índices globais aos pacotes introduzidos por instâncias paralelas
    e guarda o primeiro envio de cada um.
    """

    def __init__(self, supply: StreamSupply):
        self.supply = supply
        self.global_index: Dict[Tuple[int, int], int] = {}
        self.first_send_slots: Dict[int, int] = {}

    def introduce(self, instance: int, local_index: int, slot: int) -> int:
        index = self.supply.take()
        self.global_index[(instance, local_index)] = index
        self.first_send_slots[index] = slot
        return index

    def callback(self, instance: int) -> Callable[[int, int], None]:
        return lambda local_index, slot: self.introduce(instance, local_index, slot)


def _local(msg: FeedbackMsg) -> FeedbackMsg:
    """Feedback reendereçado para uma instância de caminho único"""
    return dataclasses.replace(msg, path=0)


class ParallelSpAcrlnc:
    """P instâncias SP AC-RLNC, uma por caminho, sobre um fluxo global comum"""

    def __init__(self, paths: int, rtt: int, packet_count: int, rngs: Sequence[np.random.Generator],
                 sender_options: Optional[Dict] = None):
        self.supply = StreamSupply(packet_count)
        self.dispatcher = StreamDispatcher(self.supply)
        options = dict(sender_options or {})
        self.instances = [
            SpAcrlncSender(rtt, None, rngs[p], stream_available=self.supply.available,
                           on_new_packet=self.dispatcher.callback(p), **options)
            for p in range(paths)
        ]
        self.receivers = [AcrlncReceiver(1) for _ in range(paths)]
        self.tracker = InOrderTracker(paths)
        self.sink = ParallelSpAcrlncSink(self)

    # lado do emissor
    @property
    def first_send_slots(self) -> Dict[int, int]:
        return self.dispatcher.first_send_slots

    @property
    def counters(self) -> Dict[str, int]:
        total: Dict[str, int] = {}
        for instance in self.instances:
            for name, count in instance.counters.items():
                total[name] = total.get(name, 0) + count
        return total

    def on_feedback(self, msg: FeedbackMsg, slot: int):
        self.instances[msg.path].on_feedback(_local(msg), slot)

    def transmissions(self, slot: int) -> List[tuple]:
        out = []
        for path, instance in enumerate(self.instances):
            out.extend((path, pkt) for _, pkt in sp_acrlnc_step(instance, slot))
        return out


class ParallelSpAcrlncSink:
    """Receptor das instâncias paralelas, com entrega medida no fluxo global"""

    def __init__(self, group: ParallelSpAcrlnc):
        self.group = group

    @property
    def in_order_slots(self) -> Dict[int, int]:
        return self.group.tracker.in_order_slots

    @property
    def per_path_delivered(self) -> List[int]:
        return self.group.tracker.per_path_delivered

    @property
    def delivered(self) -> int:
        return self.group.tracker.prefix

    def on_arrivals(self, slot: int, arrivals: List[InFlight]):
        for flight in arrivals:
            path = flight.source_path
            receiver = self.group.receivers[path]
            before = receiver.delivered
            receiver.on_arrivals(slot, [flight])
            for local in range(before + 1, receiver.delivered + 1):
                index = self.group.dispatcher.global_index[(path, local)]
                self.group.tracker.mark(index, slot, path)

    def report(self, path: int) -> ReceiverReport:
        return self.group.receivers[path].report()


@dataclass(eq=False)
class ArqPacket:
    """Pacote não codificado do SR-ARQ"""
    seq_id: int
    local_seq: int
    global_index: int
    path: int
    send_slot: int
    retransmission: bool = False


@dataclass
class SrArqConfig:
    """Parâmetros do SR-ARQ; window_size None = janela ilimitada"""
    rtt: int
    window_size: Optional[int] = None

    @classmethod
    def default(cls, rtt: int) -> 'SrArqConfig':
        return cls(rtt=rtt, window_size=rtt)


class SrArqState:
    """
    Selective repeat em um enlace: janela de envio, temporizador de um RTT e
    fila de retransmissão com prioridade sobre pacotes novos.
    """

    def __init__(self, config: SrArqConfig, path: int, next_packet: Callable[[int], Optional[int]]):
        self.config = config
        self.path = path
        self.next_packet = next_packet
        self.base = 1
        self.next_local = 1
        self.next_seq = 0
        self.global_of: Dict[int, int] = {}
        self.unacked: Dict[int, int] = {}
        self.acked: Set[int] = set()
        self.retransmit: Deque[int] = deque()
        self.by_seq: Dict[int, int] = {}
        self.counters: Dict[str, int] = {"new": 0, "retransmission": 0}

    def on_feedback(self, msg: FeedbackMsg):
        local = self.by_seq.pop(msg.about_seq, None)
        if local is None or local in self.acked:
            return
        if msg.is_ack:
            self.acked.add(local)
            self.unacked.pop(local, None)
            while self.base in self.acked:
                self.acked.discard(self.base)
                self.base += 1
        elif local not in self.retransmit:
            self.retransmit.append(local)

    def _expire_timers(self, slot: int):
        for local, sent in list(self.unacked.items()):
            if slot - sent >= self.config.rtt and local not in self.retransmit:
                self.retransmit.append(local)

    def step(self, slot: int) -> Optional[ArqPacket]:
        """sr_arq_step: retransmissão primeiro, senão um pacote novo se a janela permitir"""
        self._expire_timers(slot)
        if self.retransmit:
            local = self.retransmit.popleft()
            self.counters["retransmission"] += 1
            return self._send(local, slot, retransmission=True)

        window = self.config.window_size
        if window is not None and self.next_local - self.base >= window:
            return None
        index = self.next_packet(slot)
        if index is None:
            return None
        local = self.next_local
        self.next_local += 1
        self.global_of[local] = index
        self.counters["new"] += 1
        return self._send(local, slot, retransmission=False)

    def _send(self, local: int, slot: int, retransmission: bool) -> ArqPacket:
        pkt = ArqPacket(seq_id=self.next_seq, local_seq=local, global_index=self.global_of[local],
                        path=self.path, send_slot=slot, retransmission=retransmission)
        self.by_seq[pkt.seq_id] = local
        self.unacked[local] = slot
        self.next_seq += 1
        return pkt


def sr_arq_step(state: SrArqState, slot: int) -> Optional[ArqPacket]:
    return state.step(slot)


class SrArqSender:
    """SR-ARQ independente em cada caminho, alimentado pelo fluxo global"""

    def __init__(self, paths: int, config: SrArqConfig, packet_count: int):
        self.supply = StreamSupply(packet_count)
        self.first_send_slots: Dict[int, int] = {}
        self.links = [SrArqState(config, p, self._introduce) for p in range(paths)]

    def _introduce(self, slot: int) -> Optional[int]:
        if not self.supply.available():
            return None
        index = self.supply.take()
        self.first_send_slots[index] = slot
        return index

    @property
    def counters(self) -> Dict[str, int]:
        return {name: sum(link.counters[name] for link in self.links) for name in ("new", "retransmission")}

    def on_feedback(self, msg: FeedbackMsg, slot: int):
        self.links[msg.path].on_feedback(msg)

    def transmissions(self, slot: int) -> List[tuple]:
        out = []
        for link in self.links:
            pkt = sr_arq_step(link, slot)
            if pkt is not None:
                out.append((link.path, pkt))
        return out


class SrArqReceiver:
    """Buffer de reordenação do receptor SR-ARQ"""

    def __init__(self, paths: int):
        self.tracker = InOrderTracker(paths)

    @property
    def in_order_slots(self) -> Dict[int, int]:
        return self.tracker.in_order_slots

    @property
    def per_path_delivered(self) -> List[int]:
        return self.tracker.per_path_delivered

    @property
    def delivered(self) -> int:
        return self.tracker.prefix

    def on_arrivals(self, slot: int, arrivals: List[InFlight]):
        for flight in arrivals:
            self.tracker.mark(flight.pkt.global_index, slot, flight.path)

    def report(self, path: int = 0) -> ReceiverReport:
        return ReceiverReport(decoded_prefix=self.tracker.prefix, rank=self.tracker.prefix)


class SrArqRelay:
    """
    Nó intermediário do SR-ARQ salto-a-salto: armazena e encaminha, com um
    laço ARQ próprio por enlace de saída.
    """

    def __init__(self, hop: int, paths: int, config: SrArqConfig):
        self.hop = hop
        self.queues: List[Deque[int]] = [deque() for _ in range(paths)]
        self.links = [SrArqState(config, p, self._supplier(p)) for p in range(paths)]

    def _supplier(self, path: int) -> Callable[[int], Optional[int]]:
        queue = self.queues[path]
        return lambda slot: queue.popleft() if queue else None

    def on_arrivals(self, slot: int, arrivals: List[InFlight]):
        for flight in arrivals:
            self.queues[flight.path].append(flight.pkt.global_index)

    def on_feedback(self, msg: FeedbackMsg, slot: int):
        self.links[msg.path].on_feedback(msg)

    def transmissions(self, slot: int) -> List[tuple]:
        out = []
        for link in self.links:
            pkt = sr_arq_step(link, slot)
            if pkt is not None:
                out.append((link.path, pkt, None))
        return out

    def report(self, path: int = 0) -> ReceiverReport:
        return ReceiverReport()


def best_single_global_path(topology: Topology) -> Topology:
    """Caminho global único formado pelo melhor enlace de cada salto"""
    eps = topology.eps.min(axis=1, keepdims=True)
    return Topology(eps, topology.rtt_slots, topology.feedback_mode)


def sp_acrlnc_step(sender: SpAcrlncSender, slot: int) -> List[tuple]:
    """Um slot de uma instância SP AC-RLNC"""
    return sender.transmissions(slot)


def sp_sender_options(config: SenderConfig) -> Dict:
    """Opções do emissor multipath repassadas às instâncias de caminho único"""
    options = {
        'th': config.th,
        'rate_prior': config.rate_prior,
        'rate_estimator': config.rate_estimator,
        'horizon': config.horizon,
        'fec_enabled': config.fec_enabled,
        'fbfec_enabled': config.fbfec_enabled,
    }
    if config.o_bar is not None:
        options['o_bar'] = config.o_bar
    return options
