#!/usr/bin/env python3
"""
RLNC Codec Module
Aritmética em GF(2^8) e codificação/decodificação RLNC com janela deslizante
Projeto: AC-RLNC Multipath Simulator
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# x^8 + x^4 + x^3 + x^2 + 1
PRIMITIVE_POLY = 0x11D
FIELD_SIZE = 256


class CodingError(ValueError):
    """Erro de codificação (janela vazia, coeficientes ou payload malformados)"""


def _build_tables() -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Constrói as tabelas exp/log, a tabela completa de multiplicação e a de inversos

    Returns:
        (exp_table, log_table, mul_table, inv_table)
    """
    exp_table = np.zeros(2 * FIELD_SIZE, dtype=np.int32)
    log_table = np.zeros(FIELD_SIZE, dtype=np.int32)

    x = 1
    for i in range(FIELD_SIZE - 1):
        exp_table[i] = x
        log_table[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    # Duplicar para evitar o módulo 255 nas somas de logaritmos
    exp_table[FIELD_SIZE - 1:2 * FIELD_SIZE - 1] = exp_table[:FIELD_SIZE]

    mul_table = np.zeros((FIELD_SIZE, FIELD_SIZE), dtype=np.uint8)
    logs = log_table[1:]
    mul_table[1:, 1:] = exp_table[logs[:, None] + logs[None, :]].astype(np.uint8)

    inv_table = np.zeros(FIELD_SIZE, dtype=np.uint8)
    inv_table[1:] = exp_table[(FIELD_SIZE - 1) - log_table[1:]].astype(np.uint8)

    return exp_table, log_table, mul_table, inv_table


EXP_TABLE, LOG_TABLE, MUL_TABLE, INV_TABLE = _build_tables()


def field_add(a: int, b: int) -> int:
    """Soma em GF(2^8) (XOR)"""
    return a ^ b


def field_mul(a: int, b: int) -> int:
    """Produto em GF(2^8) sob o polinômio primitivo fixo"""
    return int(MUL_TABLE[a, b])


def field_inv(a: int) -> int:
    """Inverso multiplicativo; zero não possui inverso"""
    if a == 0:
        raise CodingError("Zero não possui inverso multiplicativo em GF(256)")
    return int(INV_TABLE[a])


def field_div(a: int, b: int) -> int:
    """Divisão a / b em GF(2^8)"""
    return field_mul(a, field_inv(b))


def scale_vector(c: int, vector: np.ndarray) -> np.ndarray:
    """Multiplica um vetor de elementos do corpo por um escalar"""
    return MUL_TABLE[c][vector]


def random_coefficients(rng: np.random.Generator, size: int) -> np.ndarray:
    """Sorteia coeficientes não nulos uniformes em GF(2^8)"""
    return rng.integers(1, FIELD_SIZE, size=size, dtype=np.uint8)


def combine_payloads(coeffs: np.ndarray, payloads: np.ndarray) -> np.ndarray:
    """
    Combinação linear de payloads: sum_i c_i * x_i

    Args:
        coeffs: Vetor de coeficientes (n,)
        payloads: Matriz de payloads (n, tamanho)

    Returns:
        Payload combinado (tamanho,)
    """
    scaled = MUL_TABLE[coeffs[:, None], payloads]
    return np.bitwise_xor.reduce(scaled, axis=0)


class PacketKind(Enum):
    """Tipo de pacote codificado"""
    NEW = "new"
    FEC = "fec"
    FBFEC = "fbfec"
    END_WINDOW_REPEAT = "end_window_repeat"

    @property
    def is_new(self) -> bool:
        return self is PacketKind.NEW


@dataclass(eq=False)
class CodedPacket:
    """Combinação RLNC sobre a janela inclusiva [w_min, w_max]"""
    seq_id: int
    w_min: int
    w_max: int
    coeffs: np.ndarray
    kind: PacketKind = PacketKind.NEW
    path: int = 0
    send_slot: int = 0
    payload: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.w_max < self.w_min:
            raise CodingError(f"Janela vazia: [{self.w_min}, {self.w_max}]")
        self.coeffs = np.asarray(self.coeffs, dtype=np.uint8)
        if self.coeffs.ndim != 1 or len(self.coeffs) != self.span:
            raise CodingError(
                f"Coeficientes com tamanho {self.coeffs.shape} para janela de {self.span} pacotes"
            )

    @property
    def window(self) -> Tuple[int, int]:
        return self.w_min, self.w_max

    @property
    def span(self) -> int:
        """DoF(c_t): número de pacotes brutos na janela"""
        return self.w_max - self.w_min + 1

    def to_dict(self) -> Dict:
        """Converte para dicionário"""
        return {
            'seq_id': self.seq_id,
            'w_min': self.w_min,
            'w_max': self.w_max,
            'coeffs': self.coeffs.tolist(),
            'kind': self.kind.value,
            'path': self.path,
            'send_slot': self.send_slot,
            'has_payload': self.payload is not None,
        }


def encode_window(raw: Optional[Mapping[int, np.ndarray]],
                  window: Tuple[int, int],
                  rng: np.random.Generator,
                  seq_id: int = 0,
                  kind: PacketKind = PacketKind.NEW,
                  path: int = 0,
                  send_slot: int = 0,
                  coeffs: Optional[np.ndarray] = None) -> CodedPacket:
    """
    Gera uma combinação RLNC dos pacotes brutos da janela

    Args:
        raw: Pacotes brutos indexados a partir de 1 (None no modo simbólico)
        window: Janela inclusiva (w_min, w_max)
        rng: Gerador de números aleatórios da execução
        coeffs: Coeficientes fixos (opcional, para testes)

    Returns:
        Pacote codificado com coeficientes aleatórios não nulos
    """
    w_min, w_max = window
    if w_max < w_min:
        raise CodingError(f"Janela vazia: [{w_min}, {w_max}]")

    span = w_max - w_min + 1
    if coeffs is None:
        coeffs = random_coefficients(rng, span)
    coeffs = np.asarray(coeffs, dtype=np.uint8)

    payload = None
    if raw is not None:
        try:
            block = np.stack([np.asarray(raw[i], dtype=np.uint8) for i in range(w_min, w_max + 1)])
        except KeyError as e:
            raise CodingError(f"Pacote bruto ausente na janela: {e}") from e
        payload = combine_payloads(coeffs, block)

    return CodedPacket(seq_id=seq_id, w_min=w_min, w_max=w_max, coeffs=coeffs,
                       kind=kind, path=path, send_slot=send_slot, payload=payload)


@dataclass(eq=False)
class EchelonRow:
    """Linha escalonada: pivô com coeficiente 1 e suporte em [pivot, hi]"""
    pivot: int
    coeffs: np.ndarray
    payload: Optional[np.ndarray] = None

    @property
    def hi(self) -> int:
        return self.pivot + len(self.coeffs) - 1


class EchelonBasis:
    """
    Base escalonada de combinações sobre índices absolutos de pacotes brutos.
    Usada pelo decodificador e pelos buffers de recodificação dos nós.
    """

    def __init__(self):
        self.rows: Dict[int, EchelonRow] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def reduce(self, lo: int, coeffs: np.ndarray,
               payload: Optional[np.ndarray] = None) -> Optional[EchelonRow]:
        """
        Reduz uma combinação contra a base

        Returns:
            Linha residual normalizada (pivô = 1) ou None se dependente
        """
        coeffs = np.array(coeffs, dtype=np.uint8)
        payload = None if payload is None else np.array(payload, dtype=np.uint8)

        while True:
            nonzero = np.flatnonzero(coeffs)
            if nonzero.size == 0:
                return None
            first = int(nonzero[0])
            last = int(nonzero[-1])
            coeffs = coeffs[first:last + 1]
            lo += first

            row = self.rows.get(lo)
            if row is None:
                break

            c = int(coeffs[0])
            if len(row.coeffs) > len(coeffs):
                coeffs = np.concatenate([coeffs, np.zeros(len(row.coeffs) - len(coeffs), dtype=np.uint8)])
            coeffs[:len(row.coeffs)] ^= MUL_TABLE[c][row.coeffs]
            if payload is not None and row.payload is not None:
                payload ^= MUL_TABLE[c][row.payload]

        inv = int(INV_TABLE[coeffs[0]])
        if inv != 1:
            coeffs = MUL_TABLE[inv][coeffs]
            if payload is not None:
                payload = MUL_TABLE[inv][payload]
        return EchelonRow(pivot=lo, coeffs=coeffs, payload=payload)

    def insert(self, lo: int, coeffs: np.ndarray,
               payload: Optional[np.ndarray] = None) -> bool:
        """Insere a combinação se for inovadora; retorna True se o posto aumentou"""
        row = self.reduce(lo, coeffs, payload)
        if row is None:
            return False
        self.rows[row.pivot] = row
        return True

    def prune_below(self, index: int) -> int:
        """Remove linhas cujo suporte termina antes de `index`"""
        stale = [pivot for pivot, row in self.rows.items() if row.hi < index]
        for pivot in stale:
            del self.rows[pivot]
        return len(stale)

    def combine(self, rng: np.random.Generator) -> Optional[Tuple[int, int, np.ndarray, Optional[np.ndarray]]]:
        """
        Recodifica: combinação aleatória não nula de todas as linhas da base

        Returns:
            (w_min, w_max, coeffs, payload) ou None se a base estiver vazia
        """
        if not self.rows:
            return None

        lo = min(self.rows)
        hi = max(row.hi for row in self.rows.values())
        coeffs = np.zeros(hi - lo + 1, dtype=np.uint8)
        with_payload = all(row.payload is not None for row in self.rows.values())
        payload = None
        betas = random_coefficients(rng, len(self.rows))

        for beta, pivot in zip(betas, sorted(self.rows)):
            row = self.rows[pivot]
            offset = pivot - lo
            coeffs[offset:offset + len(row.coeffs)] ^= MUL_TABLE[int(beta)][row.coeffs]
            if with_payload:
                scaled = MUL_TABLE[int(beta)][row.payload]
                payload = scaled if payload is None else payload ^ scaled

        # O coeficiente de borda pode se anular na soma
        nonzero = np.flatnonzero(coeffs)
        if nonzero.size == 0:
            return None
        first, last = int(nonzero[0]), int(nonzero[-1])
        return lo + first, lo + last, coeffs[first:last + 1], payload


@dataclass
class IngestReport:
    """Resultado da ingestão de um pacote no decodificador"""
    innovative: bool
    newly_in_order: int
    decoded_prefix: int


class DecoderState:
    """
    Decodificador por eliminação gaussiana com prefixo decodificado em ordem.

    Os índices brutos começam em 1; decoded_prefix = 0 significa nada decodificado.
    """

    def __init__(self, keep_payload: bool = False):
        self.basis = EchelonBasis()
        self.decoded_prefix = 0
        self.received_count = 0
        self.keep_payload = keep_payload
        self.decoded_payloads: Dict[int, np.ndarray] = {}

    @property
    def matrix(self) -> Dict[int, EchelonRow]:
        return self.basis.rows

    @property
    def rank(self) -> int:
        """Posto total: pacotes já decodificados em ordem mais linhas pendentes"""
        return self.decoded_prefix + len(self.basis)

    def ingest(self, pkt: CodedPacket) -> IngestReport:
        """Ingere um pacote codificado (ver decoder_ingest)"""
        self.received_count += 1
        lo = pkt.w_min
        coeffs = pkt.coeffs
        payload = pkt.payload if self.keep_payload else None

        if self.keep_payload and payload is None:
            raise CodingError(f"Pacote {pkt.seq_id} sem payload no modo com payload")

        if lo <= self.decoded_prefix:
            cut = self.decoded_prefix - lo + 1
            if cut >= len(coeffs):
                return IngestReport(False, 0, self.decoded_prefix)
            if payload is not None:
                payload = np.array(payload, dtype=np.uint8)
                for j in np.flatnonzero(coeffs[:cut]):
                    payload ^= MUL_TABLE[int(coeffs[j])][self.decoded_payloads[lo + int(j)]]
            coeffs = coeffs[cut:]
            lo = self.decoded_prefix + 1

        if not self.basis.insert(lo, coeffs, payload):
            return IngestReport(False, 0, self.decoded_prefix)

        newly = self._advance_prefix()
        return IngestReport(True, newly, self.decoded_prefix)

    def _advance_prefix(self) -> int:
        """Avança decoded_prefix enquanto um bloco de posto completo se fecha"""
        rows = self.basis.rows
        start = self.decoded_prefix + 1
        index = start
        max_hi = self.decoded_prefix
        closed = self.decoded_prefix

        while index in rows:
            max_hi = max(max_hi, rows[index].hi)
            if max_hi == index:
                closed = index
            index += 1

        if closed == self.decoded_prefix:
            return 0

        if self.keep_payload:
            for pivot in range(closed, start - 1, -1):
                row = rows[pivot]
                value = np.array(row.payload, dtype=np.uint8)
                for offset in np.flatnonzero(row.coeffs[1:]):
                    idx = pivot + 1 + int(offset)
                    value ^= MUL_TABLE[int(row.coeffs[1 + offset])][self.decoded_payloads[idx]]
                self.decoded_payloads[pivot] = value

        for pivot in range(start, closed + 1):
            del rows[pivot]

        newly = closed - self.decoded_prefix
        self.decoded_prefix = closed
        logger.debug(f"Prefixo decodificado avançou para {closed} (+{newly})")
        return newly


def decoder_ingest(state: DecoderState, pkt: CodedPacket) -> IngestReport:
    """
    Reduz o pacote contra o estado do decodificador

    Args:
        state: Estado do decodificador
        pkt: Pacote recebido

    Returns:
        IngestReport com inovação e quantidade de pacotes liberados em ordem
    """
    return state.ingest(pkt)
