"""BER, SNR and Q-factor of a received frame."""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import special

from fiber_nlc.core.errors import ExperimentError, LengthError

SNR_CAP_DB = 100.0
FEC_BER_THRESHOLD = 2e-2

EDC_TECHNIQUE = "edc"


def q_db_from_ber(ber: float) -> float:
    """Gaussian-equivalent Q-factor in dB, ``20 log10(sqrt(2) erfcinv(2 BER))``.

    Returns ``-inf`` for BER >= 0.5.
    """
    if ber >= 0.5:
        return -math.inf
    if ber <= 0.0:
        return math.inf
    return 20.0 * math.log10(math.sqrt(2.0) * float(special.erfcinv(2.0 * ber)))


def ber_from_q_db(q_db: float) -> float:
    """Inverse of :func:`q_db_from_ber`."""
    q = 10.0 ** (q_db / 20.0)
    return 0.5 * float(special.erfc(q / math.sqrt(2.0)))


FEC_Q_DB = q_db_from_ber(FEC_BER_THRESHOLD)


def capped_q_db(bit_errors: int, counted_bits: int) -> Tuple[float, bool]:
    """Q of an error count, limited to one error of resolution at both ends.

    A BER of zero is read as one error and a BER of 0.5 or more as one error
    short of 0.5, so the result stays finite.

    Returns:
        The Q-factor in dB and whether a limit applied
    """
    ber = bit_errors / counted_bits
    upper = max(0.5 - 1.0 / counted_bits, 0.25)
    lower = min(1.0 / counted_bits, upper)
    limited = min(max(ber, lower), upper)
    return q_db_from_ber(limited), limited != ber


class MetricsRow(BaseModel):
    """One experiment outcome."""

    model_config = ConfigDict(frozen=True)

    technique: str
    n_spans: int = Field(default=0, ge=0)
    distance_km: float = Field(default=0.0, ge=0)
    launch_power_dbm: float
    ber: float = Field(ge=0.0, le=1.0)
    snr_db: float
    q_db: float = Field(allow_inf_nan=False)
    delta_q_db: Optional[float] = None
    mults_per_symbol: float = Field(default=0.0, ge=0)
    bit_errors: int = Field(ge=0)
    counted_bits: int = Field(gt=0)
    capped: bool = False


def snr_db(tx_symbols: np.ndarray, rx_symbols: np.ndarray) -> float:
    """Error-vector SNR after a scalar least-squares gain, uncapped."""
    tx = np.asarray(tx_symbols, dtype=np.complex128).ravel()
    rx = np.asarray(rx_symbols, dtype=np.complex128).ravel()
    energy = np.vdot(rx, rx).real
    gain = np.vdot(rx, tx) / energy if energy > 0 else 0.0
    error = np.mean(np.abs(gain * rx - tx) ** 2)
    signal = np.mean(np.abs(tx) ** 2)
    if error == 0:
        return math.inf
    return 10.0 * math.log10(signal / error)


def metrics(
    tx_bits: np.ndarray,
    rx_bits: np.ndarray,
    tx_symbols: np.ndarray,
    rx_symbols: np.ndarray,
    *,
    launch_power_dbm: float,
    technique: str,
    mults_per_symbol: float = 0.0,
    n_spans: int = 0,
    distance_km: float = 0.0,
) -> MetricsRow:
    """Quality metrics of a received frame with edge symbols already removed.

    Args:
        tx_bits: Transmitted bits
        rx_bits: Detected bits
        tx_symbols: Transmitted symbols
        rx_symbols: Received symbols before decision
        launch_power_dbm: Launch power of the run
        technique: Technique label
        mults_per_symbol: Predistorter or DBP cost
        n_spans: Span count of the link
        distance_km: Link length

    Returns:
        The metrics row; SNR is capped at 100 dB and Q at the one-error value,
        with ``capped`` set when either applies

    Raises:
        ExperimentError: If no bits are counted
        LengthError: If the bit or symbol arrays differ in size
    """
    tx_bits = np.asarray(tx_bits).ravel()
    rx_bits = np.asarray(rx_bits).ravel()
    if tx_bits.size != rx_bits.size:
        raise LengthError(f"Bit arrays differ in size: {tx_bits.size} vs {rx_bits.size}")
    if np.size(tx_symbols) != np.size(rx_symbols):
        raise LengthError(f"Symbol arrays differ in size: {np.size(tx_symbols)} vs {np.size(rx_symbols)}")
    counted = int(tx_bits.size)
    if counted == 0:
        raise ExperimentError("No bits counted; the edge guard consumed the frame")

    errors = int(np.count_nonzero(tx_bits != rx_bits))
    ber = errors / counted
    capped = False

    snr = snr_db(tx_symbols, rx_symbols)
    if snr > SNR_CAP_DB:
        snr = SNR_CAP_DB
        capped = True

    q, q_capped = capped_q_db(errors, counted)
    capped = capped or q_capped

    return MetricsRow(
        technique=technique,
        n_spans=n_spans,
        distance_km=distance_km,
        launch_power_dbm=launch_power_dbm,
        ber=ber,
        snr_db=snr,
        q_db=q,
        mults_per_symbol=mults_per_symbol,
        bit_errors=errors,
        counted_bits=counted,
        capped=capped,
    )


def combine_rows(rows: Sequence[MetricsRow], snr_values: Sequence[float]) -> MetricsRow:
    """Merge per-frame rows of one configuration.

    Bit errors are summed; SNR is averaged in the linear domain over the
    per-frame values given (uncapped).
    """
    if not rows:
        raise ExperimentError("No frames to combine")
    first = rows[0]
    errors = sum(row.bit_errors for row in rows)
    counted = sum(row.counted_bits for row in rows)
    ber = errors / counted
    linear = [10.0 ** (value / 10.0) for value in snr_values if math.isfinite(value)]
    capped = len(linear) < len(snr_values)
    snr = 10.0 * math.log10(np.mean(linear)) if linear else SNR_CAP_DB
    if snr > SNR_CAP_DB:
        snr, capped = SNR_CAP_DB, True
    q, q_capped = capped_q_db(errors, counted)
    capped = capped or q_capped
    return first.model_copy(
        update={
            "ber": ber,
            "snr_db": snr,
            "q_db": q,
            "bit_errors": errors,
            "counted_bits": counted,
            "capped": capped,
        }
    )


def attach_q_gain(rows: Sequence[MetricsRow]) -> List[MetricsRow]:
    """Fill ``delta_q_db`` against the EDC row of the same launch power and span count."""
    baseline: Dict[tuple, float] = {
        (row.launch_power_dbm, row.n_spans): row.q_db for row in rows if row.technique == EDC_TECHNIQUE
    }
    result = []
    for row in rows:
        reference = baseline.get((row.launch_power_dbm, row.n_spans))
        delta = None if reference is None else row.q_db - reference
        result.append(row.model_copy(update={"delta_q_db": delta}))
    return result


def q_gain_at_optimum(rows: Sequence[MetricsRow]) -> Dict[str, float]:
    """Best Q of every technique minus the best EDC Q.

    Raises:
        ExperimentError: If there is no EDC row
    """
    best: Dict[str, float] = {}
    for row in rows:
        best[row.technique] = max(best.get(row.technique, -math.inf), row.q_db)
    if EDC_TECHNIQUE not in best:
        raise ExperimentError("Q gain needs an EDC baseline row")
    return {technique: q - best[EDC_TECHNIQUE] for technique, q in best.items()}
