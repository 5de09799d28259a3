#!/usr/bin/env python3
"""
Metrics Collector Module
Medição de vazão e atraso de entrega em ordem sobre traços de simulação
Projeto: AC-RLNC Multipath Simulator
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

METRIC_FIELDS = ('normalized_throughput', 'mean_delay', 'max_delay')


class IncompleteTraceError(RuntimeError):
    """O protocolo não entregou todos os pacotes (falha de vivacidade)"""


class MetricsError(ValueError):
    """Erro de agregação de métricas"""


@dataclass
class DeliveryRecord:
    """Entrega em ordem de um pacote bruto"""
    raw_index: int
    first_send_slot: int
    in_order_slot: int

    @property
    def delay(self) -> int:
        return self.in_order_slot - self.first_send_slot


@dataclass
class SessionTrace:
    """Traço completo de uma sessão simulada"""
    records: List[DeliveryRecord]
    packet_count: int
    rtt: int
    paths: int
    slots_run: int
    per_path_delivered: List[int] = field(default_factory=list)
    no_feedback_slots: int = 0
    counters: Dict[str, int] = field(default_factory=dict)
    complete: bool = True
    digest: str = ""

    @property
    def delivered(self) -> int:
        return len(self.records)

    @property
    def lambda_no_feedback(self) -> float:
        """Fração dos slots sem nenhuma chegada de feedback no emissor"""
        if self.slots_run <= 0:
            return 0.0
        return self.no_feedback_slots / self.slots_run


@dataclass
class RunMetrics:
    """Métricas de uma iteração"""
    normalized_throughput: float
    mean_delay: float
    max_delay: float
    delivered: int
    busy_slots: int
    per_path_delivered: List[int]
    lambda_no_feedback: float
    counters: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return {
            'throughput': self.normalized_throughput,
            'mean_delay': self.mean_delay,
            'max_delay': self.max_delay,
            'delivered': self.delivered,
            'slots': self.busy_slots,
            'per_path_delivered': list(self.per_path_delivered),
            'lambda_no_feedback': self.lambda_no_feedback,
            **{f"{name}_sent": count for name, count in self.counters.items()},
        }


@dataclass
class AggregateSummary:
    """Média e desvio padrão amostral por métrica"""
    count: int
    mean: Dict[str, float]
    std: Dict[str, float]

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return {'count': self.count, 'mean': dict(self.mean), 'std': dict(self.std)}


def measure(trace: SessionTrace) -> RunMetrics:
    """
    Calcula vazão normalizada e atrasos de entrega em ordem

    A vazão divide os pacotes entregues pelo período ativo do emissor, ou seja,
    do primeiro envio até a última entrega descontada a propagação de ida.

    Args:
        trace: Traço completo da sessão

    Returns:
        RunMetrics da iteração
    """
    if not trace.complete or trace.delivered < trace.packet_count:
        raise IncompleteTraceError(
            f"Traço incompleto: {trace.delivered}/{trace.packet_count} pacotes entregues "
            f"após {trace.slots_run} slots"
        )

    delays = np.array([record.delay for record in trace.records], dtype=float)
    first_send = min(record.first_send_slot for record in trace.records)
    last_delivery = max(record.in_order_slot for record in trace.records)
    busy_slots = max(1, last_delivery - trace.rtt // 2 - first_send + 1)

    return RunMetrics(
        normalized_throughput=trace.delivered / busy_slots,
        mean_delay=float(np.mean(delays)),
        max_delay=float(np.max(delays)),
        delivered=trace.delivered,
        busy_slots=busy_slots,
        per_path_delivered=list(trace.per_path_delivered),
        lambda_no_feedback=trace.lambda_no_feedback,
        counters=dict(trace.counters),
    )


def aggregate(runs: Sequence[RunMetrics]) -> AggregateSummary:
    """
    Agrega iterações: média aritmética e desvio padrão amostral

    Args:
        runs: Lista não vazia de métricas

    Returns:
        AggregateSummary
    """
    if not runs:
        raise MetricsError("Nenhuma iteração para agregar")

    mean, std = {}, {}
    for name in METRIC_FIELDS + ('lambda_no_feedback',):
        values = np.array([getattr(run, name) for run in runs], dtype=float)
        mean[name] = float(np.mean(values))
        std[name] = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0

    return AggregateSummary(count=len(runs), mean=mean, std=std)
