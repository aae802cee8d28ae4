"""Monte-Carlo frame simulation: bits in, metrics out."""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from fiber_nlc.channel.amplifier import NoiseModel
from fiber_nlc.channel.link import propagate_link
from fiber_nlc.channel.ssfm import SpanPlan
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.experiment import FrameOutcome
from fiber_nlc.core.technique import RECEIVE, TRANSMIT, LinkSetup, Technique
from fiber_nlc.harness.spec import ExperimentSpec
from fiber_nlc.model.modulation import BITS_PER_SYMBOL, qam16_map, random_bits
from fiber_nlc.model.shaping import resample, rrc_taps, shape
from fiber_nlc.model.types import SampledField, SymbolGrid, dbm_to_w
from fiber_nlc.predistortion.sweep import Chain
from fiber_nlc.receiver.dsp import apply_gain, edc, known_data_gain, matched_filter_downsample, ml_detect
from fiber_nlc.receiver.metrics import metrics, snr_db


@dataclass(frozen=True)
class Frame:
    """Transmit data of one frame; ``bits`` has shape ``(2, 4 K)``."""

    index: int
    bits: np.ndarray
    symbols: SymbolGrid
    noise_seed: np.random.SeedSequence


def frame_seeds(master_seed: int, frame_index: int) -> Tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent bit and noise seeds of a frame."""
    bits_seed, noise_seed = np.random.SeedSequence([int(master_seed), int(frame_index)]).spawn(2)
    return bits_seed, noise_seed


def draw_frame(spec: ExperimentSpec, frame_index: int) -> Frame:
    """Random 16-QAM symbols of a frame on both polarizations."""
    bits_seed, noise_seed = frame_seeds(spec.experiment.seed, frame_index)
    rng = np.random.default_rng(bits_seed)
    n_bits = BITS_PER_SYMBOL * spec.experiment.n_symbols_per_frame
    bits = np.vstack([random_bits(n_bits, rng), random_bits(n_bits, rng)])
    symbols = SymbolGrid(qam16_map(bits[0]), qam16_map(bits[1]), spec.symbol_rate)
    return Frame(index=frame_index, bits=bits, symbols=symbols, noise_seed=noise_seed)


def launch_scale(spec: ExperimentSpec, launch_power_dbm: float) -> float:
    """Amplitude that gives unit-energy symbols the launch power over both polarizations."""
    return math.sqrt(0.5 * dbm_to_w(launch_power_dbm) * spec.simulation.samples_per_symbol)


def launch_field(spec: ExperimentSpec, setup: LinkSetup, symbols: SymbolGrid) -> SampledField:
    """RRC-shape symbols at the forward rate and scale them to the launch power."""
    sps = spec.simulation.samples_per_symbol
    taps = rrc_taps(spec.signal.rrc_rolloff, spec.signal.rrc_span_symbols, sps)
    return shape(symbols, taps, sps).scaled(launch_scale(spec, setup.launch_power_dbm))


def propagate(spec: ExperimentSpec, setup: LinkSetup, field: SampledField, noise_seed: np.random.SeedSequence) -> SampledField:
    """Send a launched field over the link and resample it to the receiver rate."""
    link = setup.link
    plan = SpanPlan.from_step_size(link.span_length, spec.simulation.step_size_km * 1e3)
    noise = NoiseModel.for_link(link, seed=noise_seed, enabled=spec.simulation.ase_enabled)
    received = propagate_link(field, link, plan, noise)
    received = received.scaled(1.0 / launch_scale(spec, setup.launch_power_dbm))
    return resample(received, setup.rx_samples_per_symbol, spec.symbol_rate)


def detect_symbols(spec: ExperimentSpec, setup: LinkSetup, field: SampledField, reference: SymbolGrid) -> SymbolGrid:
    """Matched filter, edge trim and known-data gain; returns the soft symbols of the counted region."""
    taps = rrc_taps(spec.signal.rrc_rolloff, spec.signal.rrc_span_symbols, setup.rx_samples_per_symbol)
    guard = spec.edge_guard()
    received = matched_filter_downsample(field, taps, setup.rx_samples_per_symbol).trimmed(guard)
    return apply_gain(received, known_data_gain(received, reference.trimmed(guard)))


def simulate_frame(
    spec: ExperimentSpec, technique: Technique, setup: LinkSetup, frame_index: int, context: RunContext
) -> FrameOutcome:
    """Simulate one frame of one technique at one launch power.

    The chain is: map, technique transmit step, shape and scale, propagate,
    resample, technique receive step, matched filter, gain, detect. BER and
    SNR count only the symbols inside the edge guard.
    """
    frame = draw_frame(spec, frame_index)
    sent = technique.execute(TRANSMIT, frame.symbols, setup, context)
    field = propagate(spec, setup, launch_field(spec, setup, sent), frame.noise_seed)
    field = technique.execute(RECEIVE, field, setup, context)
    soft = detect_symbols(spec, setup, field, frame.symbols)

    _, rx_bits = ml_detect(soft)
    guard = spec.edge_guard()
    tx_bits = frame.bits[:, BITS_PER_SYMBOL * guard : BITS_PER_SYMBOL * (len(frame.symbols) - guard)]
    tx = frame.symbols.trimmed(guard)

    row = metrics(
        tx_bits,
        rx_bits,
        tx.stacked(),
        soft.stacked(),
        launch_power_dbm=setup.launch_power_dbm,
        technique=technique.id,
        mults_per_symbol=technique.mults_per_symbol(setup, context),
        n_spans=setup.n_spans,
        distance_km=setup.link.total_length / 1e3,
    )
    return FrameOutcome(row=row, snr_db=snr_db(tx.stacked(), soft.stacked()))


def epsilon_chain(spec: ExperimentSpec, setup: LinkSetup, frame: Frame) -> Chain:
    """End-to-end SNR of predistorted symbols with receiver-side EDC, for epsilon tuning."""

    def chain(predistorted: SymbolGrid) -> float:
        field = propagate(spec, setup, launch_field(spec, setup, predistorted), frame.noise_seed)
        field = edc(field, setup.link, setup.link.total_length)
        soft = detect_symbols(spec, setup, field, frame.symbols)
        return snr_db(frame.symbols.trimmed(spec.edge_guard()).stacked(), soft.stacked())

    return chain
