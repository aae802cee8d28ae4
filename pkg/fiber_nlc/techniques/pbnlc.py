"""Perturbation-based predistortion techniques (first and second order)."""

from abc import abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

from fiber_nlc.coeffs.lut import load_table, table_filename
from fiber_nlc.coeffs.tables import CoeffTable
from fiber_nlc.coeffs.types import CoeffOrder
from fiber_nlc.complexity import count_M, mult_pbnlc
from fiber_nlc.core.context import RunContext
from fiber_nlc.core.errors import ConfigurationError
from fiber_nlc.core.registry import register_technique
from fiber_nlc.core.technique import LinkSetup, Technique
from fiber_nlc.model.types import SampledField, SymbolGrid
from fiber_nlc.predistortion.predistorter import PredistortConfig, predistort
from fiber_nlc.receiver.dsp import edc

EPSILON_EXTRA = "epsilon"


def tables_key(n_spans: int) -> str:
    """Context resource name of the coefficient tables of a link length."""
    return f"tables:{int(n_spans)}"


def load_tables(context: RunContext, n_spans: int, orders: List[CoeffOrder]) -> Dict[CoeffOrder, CoeffTable]:
    """Tables of a link length, from the context or the configured tables directory.

    Raises:
        ConfigurationError: If a table is neither in the context nor on disk
    """
    cached: Dict[CoeffOrder, CoeffTable] = context.get_resource(tables_key(n_spans)) or {}
    tables = dict(cached)
    directory = Path(context.config.get("runtime.tables_dir", "./tables"))
    for order in orders:
        if order in tables:
            continue
        path = directory / table_filename(order, n_spans)
        if not path.exists():
            raise ConfigurationError(
                f"Missing coefficient table {path}; run build-tables first",
                details={"order": order.value, "n_spans": n_spans},
            )
        tables[order] = load_table(path)
    context.set_resource(tables_key(n_spans), tables)
    return tables


class PbnlcTechnique(Technique):
    """Predistortion from coefficient tables followed by receiver-side EDC.

    Config:
        epsilon: Scaling factor of the order this technique compensates
        window: Symbol window of the distortion sums
        use_term2: Include Term 2 of the second-order distortion
    """

    orders: List[CoeffOrder] = []

    def __init__(self, technique_id: str, config: Dict[str, Any]):
        super().__init__(technique_id, config)
        self.epsilon = float(config.get("epsilon", 1.0))
        self.window = int(config.get("window", 100))
        self.use_term2 = bool(config.get("use_term2", False))

    def required_orders(self) -> List[CoeffOrder]:
        return list(self.orders)

    def prepare(self, setup: LinkSetup, context: RunContext) -> None:
        load_tables(context, setup.n_spans, self.required_orders())

    @abstractmethod
    def predistort_config(
        self, setup: LinkSetup, context: RunContext, epsilon: Optional[float] = None
    ) -> PredistortConfig:
        """Predistorter settings for a link; ``epsilon`` overrides the configured value."""

    def tuned_config(self, setup: LinkSetup, context: RunContext) -> PredistortConfig:
        """Predistorter settings with any epsilons tuned for this launch power applied.

        Tuned values travel in ``setup.extras["epsilon"]`` keyed by technique label
        as ``(epsilon_fo, epsilon_so)``.
        """
        cfg = self.predistort_config(setup, context)
        tuned = setup.extras.get(EPSILON_EXTRA, {}).get(self.id)
        if tuned is None:
            return cfg
        return cfg.with_epsilon(*tuned)

    def transmit(self, symbols: SymbolGrid, setup: LinkSetup, context: RunContext) -> SymbolGrid:
        return predistort(symbols, self.tuned_config(setup, context), context)

    def receive(self, field: SampledField, setup: LinkSetup, context: RunContext) -> SampledField:
        return edc(field, setup.link, setup.link.total_length)

    def _tables(self, setup: LinkSetup, context: RunContext) -> Dict[CoeffOrder, CoeffTable]:
        return load_tables(context, setup.n_spans, self.required_orders())

    def mults_per_symbol(self, setup: LinkSetup, context: RunContext) -> float:
        tables = self._tables(setup, context)
        return mult_pbnlc(sum(count_M(tables[order]) for order in self.required_orders()))


@register_technique("fo")
class FoPbnlcTechnique(PbnlcTechnique):
    """First-order perturbation-based predistortion."""

    orders = [CoeffOrder.FO]

    def predistort_config(self, setup: LinkSetup, context: RunContext, epsilon: Optional[float] = None) -> PredistortConfig:
        tables = self._tables(setup, context)
        return PredistortConfig(
            epsilon_fo=self.epsilon if epsilon is None else epsilon,
            window=self.window,
            gamma=setup.link.gamma,
            peak_power=setup.pulse.P0,
            fo_table=tables[CoeffOrder.FO],
        )


@register_technique("so")
class SoPbnlcTechnique(PbnlcTechnique):
    """Second-order predistortion: the first-order correction plus the second-order one.

    Config (in addition to the base keys):
        epsilon_fo: Scaling factor of the first-order part (default: ``epsilon``)
    """

    orders = [CoeffOrder.FO, CoeffOrder.SO_TERM1]

    def __init__(self, technique_id: str, config: Dict[str, Any]):
        super().__init__(technique_id, config)
        self.epsilon_fo = float(config.get("epsilon_fo", self.epsilon))

    def required_orders(self) -> List[CoeffOrder]:
        orders = list(self.orders)
        if self.use_term2:
            orders.append(CoeffOrder.SO_TERM2)
        return orders

    def predistort_config(self, setup: LinkSetup, context: RunContext, epsilon: Optional[float] = None) -> PredistortConfig:
        tables = self._tables(setup, context)
        return PredistortConfig(
            epsilon_fo=self.epsilon_fo,
            epsilon_so=self.epsilon if epsilon is None else epsilon,
            window=self.window,
            use_term2=self.use_term2,
            gamma=setup.link.gamma,
            peak_power=setup.pulse.P0,
            fo_table=tables[CoeffOrder.FO],
            so_term1_table=tables[CoeffOrder.SO_TERM1],
            so_term2_table=tables.get(CoeffOrder.SO_TERM2),
        )

    def mults_per_symbol(self, setup: LinkSetup, context: RunContext) -> float:
        # The second-order row is charged for its own table groups
        tables = self._tables(setup, context)
        orders = [order for order in self.required_orders() if order.is_second_order]
        return mult_pbnlc(sum(count_M(tables[order]) for order in orders))
