#!/usr/bin/env python3
"""
Bounds Analyzer Module
Avaliação analítica dos limites de vazão e atraso do AC-RLNC em redes
multipath e multipath multi-hop, com varreduras em tabelas pandas
Projeto: AC-RLNC Multipath Simulator
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import erf

from acrlnc_protocol import round_half_away
from path_matching import Matching, global_path_rates, min_cut_capacity

logger = logging.getLogger(__name__)

# 1 − erf(1/√2): fração esperada de pacotes inúteis no fim da janela
USELESS_FRACTION = 1.0 - float(erf(1.0 / math.sqrt(2.0)))


class BoundDomainError(ValueError):
    """Entradas fora do domínio de um limite"""


@dataclass
class BoundInputs:
    """
    Entradas dos limites. eps são as probabilidades de apagamento por caminho
    (ou 1 − r_Gp dos caminhos globais em multi-hop).
    """
    eps: Sequence[float]
    rtt: int
    o_bar: Optional[float] = None
    window_factor: Optional[float] = None
    th: float = 0.0
    P_e: float = 1e-3
    lam: float = 0.0
    H: int = 1
    capacity: Optional[float] = None

    def __post_init__(self):
        self.eps = np.array(self.eps, dtype=float)
        if self.eps.ndim != 1 or self.eps.size == 0:
            raise BoundDomainError(f"eps deve ser um vetor não vazio, recebido formato {self.eps.shape}")
        if np.any(self.eps < 0.0) or np.any(self.eps > 1.0):
            raise BoundDomainError("Probabilidades de apagamento fora de [0, 1]")
        if self.rtt < 2:
            raise BoundDomainError(f"rtt deve ser >= 2, recebido {self.rtt}")
        if not 0.0 < self.P_e < 1.0:
            raise BoundDomainError(f"P_e deve estar em (0, 1), recebido {self.P_e}")
        if not 0.0 <= self.lam <= 1.0:
            raise BoundDomainError(f"λ deve estar em [0, 1], recebido {self.lam}")
        if self.f < 1.0:
            raise BoundDomainError(f"Fator de janela f deve ser >= 1, recebido {self.f}")

    @property
    def P(self) -> int:
        return int(self.eps.size)

    @property
    def k(self) -> int:
        return self.P * (self.rtt - 1)

    @property
    def f(self) -> float:
        """Fator de janela f = ō/k"""
        if self.window_factor is not None:
            return float(self.window_factor)
        if self.o_bar is not None:
            return float(self.o_bar) / self.k
        return 2.0

    @property
    def window(self) -> float:
        """ō total"""
        return self.o_bar if self.o_bar is not None else self.f * self.k

    @property
    def rates(self) -> np.ndarray:
        return 1.0 - self.eps

    @property
    def eps_bar(self) -> float:
        """Probabilidade média de apagamento da rede"""
        return float(self.eps.mean())


@dataclass
class MaxDelayBound:
    alpha: float
    T_max: int
    D_max_ub: int


@dataclass
class BoundReport:
    """Todos os limites de uma configuração"""
    throughput_ub: float
    throughput_lb: float
    capacity: float
    mean_delay_ub: float
    max_delay_ub: float
    T_max: float
    genie_delay_lb: float
    prod_delay_lb: float
    rtt: int = 0
    f: float = 0.0
    P: int = 0
    H: int = 1
    eps_bar: float = 0.0
    diagnostics: List[str] = field(default_factory=list)

    @property
    def F_eta(self) -> float:
        return 100.0 * self.throughput_lb / self.throughput_ub if self.throughput_ub > 0 else 0.0

    @property
    def F_capacity(self) -> float:
        return 100.0 * self.throughput_lb / self.capacity if self.capacity > 0 else 0.0

    def to_dict(self) -> Dict:
        """Converte para dicionário (uma linha de tabela)"""
        return {
            'rtt': self.rtt,
            'f': self.f,
            'P': self.P,
            'H': self.H,
            'eps_bar': self.eps_bar,
            'throughput_ub': self.throughput_ub,
            'throughput_lb': self.throughput_lb,
            'capacity': self.capacity,
            'ub_over_capacity': self.throughput_ub / self.capacity if self.capacity > 0 else 0.0,
            'F_eta': self.F_eta,
            'F_capacity': self.F_capacity,
            'mean_delay_ub': self.mean_delay_ub,
            'max_delay_ub': self.max_delay_ub,
            'T_max': self.T_max,
            'genie_delay_lb': self.genie_delay_lb,
            'prod_delay_lb': self.prod_delay_lb,
            'diagnostics': "; ".join(self.diagnostics),
        }


def bhattacharyya_bernoulli(r: float, r_prime: float) -> float:
    """
    Distância de Bhattacharyya entre duas Bernoulli (recebido/apagado) em um slot

    Returns:
        −ln(√(r·r') + √((1−r)(1−r'))), +∞ para suportes disjuntos
    """
    coefficient = math.sqrt(r * r_prime) + math.sqrt((1.0 - r) * (1.0 - r_prime))
    coefficient = min(coefficient, 1.0)
    if coefficient <= 0.0:
        return math.inf
    return -math.log(coefficient)


def _rate_up(eps: float, rtt: int) -> float:
    """Taxa otimista do caminho, limitada a 1"""
    r = 1.0 - eps
    m = round_half_away(eps * (rtt - 1))
    return min(1.0, r + math.sqrt(rtt * eps * (1.0 - eps)) / (rtt - 1 + m))


def _per_path_ub(eps: float, rtt: int) -> float:
    r = 1.0 - eps
    # distância acumulada sobre os RTT slots da janela
    distance = rtt * bhattacharyya_bernoulli(_rate_up(eps, rtt), r)
    return max(0.0, r - distance)


def throughput_ub(inputs: BoundInputs) -> float:
    """Limite superior de vazão: soma por caminho da taxa menos a distância acumulada"""
    return float(sum(_per_path_ub(e, inputs.rtt) for e in inputs.eps))


def throughput_lb(inputs: BoundInputs) -> float:
    """
    Limite inferior: desconta do termo superior de cada caminho a fração de
    pacotes inúteis no fim da janela, n_EW / n_w

    A taxa de referência de cada caminho é o termo do limite superior (r menos a
    distância acumulada), não r; em multi-hop, r é a taxa do caminho global.
    """
    k = inputs.rtt - 1
    f = inputs.f
    total = 0.0
    for e in inputs.eps:
        n_ew = USELESS_FRACTION * (1.0 - e) * inputs.rtt
        n_w = (k + k * e + k * e ** 2) * f + 1.0
        total += max(0.0, _per_path_ub(e, inputs.rtt) - n_ew / n_w)
    return float(total)


def _eps_bar_max(eps_bar: float, rtt: int) -> float:
    return eps_bar + math.sqrt(2.0 * rtt * (1.0 - eps_bar) * eps_bar) / (2.0 * rtt)


def mean_delay_ub(inputs: BoundInputs, diagnostics: Optional[List[str]] = None) -> float:
    """
    Limite superior do atraso médio em ordem sobre o caminho virtual de
    probabilidade média ε̄ e janela ō/P

    ε̄ é a média dos ε por caminho (em multi-hop, 1 − r dos caminhos globais) e o
    termo de ACK soma rtt à janela, então ε̄ = 0 dá λ·k_p + (1−λ)·(k_p + rtt).

    Returns:
        λ·D_sem_feedback + (1−λ)·(D_nack + D_ack); +∞ se ε̄_max >= 1
    """
    eps_bar = inputs.eps_bar
    eps_max = _eps_bar_max(eps_bar, inputs.rtt)
    if eps_max >= 1.0:
        message = f"ε̄_max = {eps_max:.4f} >= 1: limite de atraso médio infinito"
        logger.debug(message)
        if diagnostics is not None:
            diagnostics.append(message)
        return math.inf

    rtt = inputs.rtt
    window = inputs.window / inputs.P
    n = max(1, int(round(window)))
    k_p = rtt - 1
    m_e = window * eps_bar
    p_eow = (1.0 - eps_bar) ** window
    p_delta = float(stats.binom.cdf(math.floor(n * eps_max), n, eps_bar) - stats.binom.pmf(0, n, eps_bar))

    eow_term = p_eow * (m_e + k_p)
    d_nofb = (eow_term + (1.0 - p_eow) * rtt) / (1.0 - eps_max)
    d_nack = eps_max / (1.0 - eps_max) * (
        p_delta * ((1.0 - p_eow) * rtt + eow_term) + (1.0 - p_delta) * (rtt + eow_term)
    )
    d_ack = (1.0 - eps_max) * (eow_term + rtt)
    return float(inputs.lam * d_nofb + (1.0 - inputs.lam) * (d_nack + d_ack))


def max_delay_ub(inputs: BoundInputs) -> MaxDelayBound:
    """
    Limite do atraso máximo com probabilidade de erro P_e (desigualdade de Hoeffding)

    Raises:
        BoundDomainError: ε̄ = 1
    """
    eps_bar = inputs.eps_bar
    if eps_bar >= 1.0:
        raise BoundDomainError("ε̄ = 1: atraso máximo indefinido")

    eps_max = float(inputs.eps.max())
    alpha = max(0.0, math.log(eps_max / inputs.P_e)) if eps_max > 0 else 0.0
    window = inputs.window
    q = 1.0 - eps_bar
    t_max = math.ceil(
        1.0 + (window - 1.0) / q + alpha / (4.0 * q ** 2)
        + math.sqrt(alpha * (alpha + 4.0 * q * (window - 1.0))) / 2.0
    )
    d_max = math.ceil(inputs.rtt / 2.0) + math.ceil(t_max / inputs.P)
    return MaxDelayBound(alpha=alpha, T_max=int(t_max), D_max_ub=int(d_max))


def genie_delay_lb(inputs: BoundInputs) -> float:
    """Atraso de um emissor que conhece os apagamentos futuros"""
    eps_bar = inputs.eps_bar
    if eps_bar >= 1.0:
        return math.inf
    return inputs.rtt / 2.0 + 1.0 / (1.0 - eps_bar)


def prod_delay_lb(inputs: BoundInputs) -> float:
    """Limite pelo evento de apagamento em todos os caminhos"""
    all_erased = float(np.prod(inputs.eps))
    if all_erased >= 1.0:
        return math.inf
    return inputs.rtt / 2.0 + 1.0 / (1.0 - all_erased)


def mp_bounds(inputs: BoundInputs) -> BoundReport:
    """Avalia todos os limites de uma configuração"""
    diagnostics: List[str] = []
    capacity = inputs.capacity if inputs.capacity is not None else float(inputs.rates.sum())

    try:
        max_delay = max_delay_ub(inputs)
        t_max, d_max = float(max_delay.T_max), float(max_delay.D_max_ub)
    except BoundDomainError as e:
        diagnostics.append(str(e))
        t_max = d_max = math.inf

    return BoundReport(
        throughput_ub=throughput_ub(inputs),
        throughput_lb=throughput_lb(inputs),
        capacity=capacity,
        mean_delay_ub=mean_delay_ub(inputs, diagnostics),
        max_delay_ub=d_max,
        T_max=t_max,
        genie_delay_lb=genie_delay_lb(inputs),
        prod_delay_lb=prod_delay_lb(inputs),
        rtt=inputs.rtt,
        f=inputs.f,
        P=inputs.P,
        H=inputs.H,
        eps_bar=inputs.eps_bar,
        diagnostics=diagnostics,
    )


def mh_bounds(inputs: BoundInputs, matching: Matching, rates, forwarding: bool = False) -> BoundReport:
    """
    Limites multi-hop: a rede casada equivale a uma rede multipath com as
    taxas dos caminhos globais; a capacidade é o corte mínimo

    Args:
        inputs: Parâmetros comuns (eps é substituído pelas taxas globais)
        matching: Casamento admissível
        rates: Matriz H×P de taxas dos enlaces
        forwarding: Produto das taxas (sem recodificação) em vez do mínimo
    """
    r_G = global_path_rates(matching, rates, forwarding=forwarding).r_G
    routed = replace(inputs, eps=np.clip(1.0 - r_G, 0.0, 1.0), H=matching.H,
                     capacity=min_cut_capacity(rates))
    return mp_bounds(routed)


def rtt_sweep(eps: Sequence[float], rtt_values: Iterable[int], **kwargs) -> pd.DataFrame:
    """Tabela de limites ao longo de uma varredura de RTT"""
    rows = [mp_bounds(BoundInputs(eps=eps, rtt=int(rtt), **kwargs)).to_dict() for rtt in rtt_values]
    return pd.DataFrame(rows)


def f_sweep(eps: Sequence[float], rtt: int, f_values: Iterable[float], **kwargs) -> pd.DataFrame:
    """Tabela de limites ao longo de uma varredura do fator de janela f"""
    rows = [mp_bounds(BoundInputs(eps=eps, rtt=rtt, window_factor=float(f), **kwargs)).to_dict()
            for f in f_values]
    return pd.DataFrame(rows)


def eps_sweep(cells: Iterable[Tuple[Dict, Sequence[float]]], rtt: int, **kwargs) -> pd.DataFrame:
    """
    Tabela de limites para uma lista de células (rótulos, eps)

    Os rótulos (por exemplo e1 e e2) são copiados para as colunas da linha.
    """
    rows = []
    for labels, eps in cells:
        row = dict(labels)
        row.update(mp_bounds(BoundInputs(eps=eps, rtt=rtt, **kwargs)).to_dict())
        rows.append(row)
    return pd.DataFrame(rows)
