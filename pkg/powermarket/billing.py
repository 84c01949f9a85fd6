import logging
from typing import TYPE_CHECKING, Dict, Tuple

import numpy as np
import pandas as pd

from .market import hourly_to_isp, market_comparison, ondemand_cost, schedule_day_ahead, settle, spot_per_isp
from .types import Settlement

if TYPE_CHECKING:
    from .engine import Simulator


ISP_COLUMNS = ("isp_start", "delivered_mwh", "scheduled_mwh", "spot_eur_mwh", "shortage_eur_mwh", "surplus_eur_mwh", "forecast_eur_mwh")
ZERO_COST_KEYS = (
    "cost_day_ahead_eur",
    "cost_shortage_eur",
    "refund_surplus_eur",
    "cost_total_eur",
    "cost_total_one_price_eur",
    "cost_total_two_price_eur",
    "cost_market_day_ahead_eur",
    "cost_market_balancing_eur",
)


class BillingMixin:
    """Mixin class for procurement, settlement and tariff accounting."""

    def _procure(self: 'Simulator', delivered: pd.Series) -> pd.Series:
        """Day-ahead schedule per ISP, using the run's own hourly load as the forecast."""
        hourly = delivered.groupby(delivered.index.floor("h")).sum()
        return hourly_to_isp(schedule_day_ahead(hourly, self.config.procurement, self.book))

    def _bill(self: 'Simulator', delivered: pd.Series) -> Tuple[pd.DataFrame, pd.DataFrame, Dict[str, float]]:
        """Settle the delivered energy and price it under every market option.

        Returns:
            (per-ISP frame, settlement lines of the configured price system, cost totals in EUR)
        """
        costs: Dict[str, float] = {}
        total_mwh = float(delivered.sum())
        for tariff in self.config.tariffs:
            costs[f"cost_on_demand_{tariff.label}_eur"] = ondemand_cost(total_mwh, tariff)

        empty_isps = pd.DataFrame(columns=list(ISP_COLUMNS))
        if self.book is None or delivered.empty:
            for key in ZERO_COST_KEYS:
                costs[key] = 0.0
            return empty_isps, Settlement(self.config.price_system, 0.0, 0.0, 0.0, ()).to_frame(), costs

        scheduled = self._procure(delivered)
        index = delivered.index.union(scheduled.index)
        scheduled = scheduled.reindex(index, fill_value=0.0)
        delivered = delivered.reindex(index, fill_value=0.0)

        settlements = {system: settle(self.book, system, scheduled, delivered) for system in ("one", "two")}
        chosen = settlements[self.config.price_system]
        costs.update(
            {
                "cost_day_ahead_eur": chosen.day_ahead_cost,
                "cost_shortage_eur": chosen.shortage_cost,
                "refund_surplus_eur": chosen.surplus_refund,
                "cost_total_eur": chosen.total,
                "cost_total_one_price_eur": settlements["one"].total,
                "cost_total_two_price_eur": settlements["two"].total,
            }
        )
        for market, cost in market_comparison(self.book, delivered, ()).items():
            costs[f"cost_market_{market}_eur"] = cost

        prices = self.book.imbalance.reindex(index)
        forecast = self.forecast.reindex(index) if self.forecast is not None else pd.Series(np.nan, index=index)
        isps = pd.DataFrame(
            {
                "isp_start": index,
                "delivered_mwh": delivered.to_numpy(),
                "scheduled_mwh": scheduled.to_numpy(),
                "spot_eur_mwh": spot_per_isp(self.book, index),
                "shortage_eur_mwh": prices["shortage"].to_numpy(),
                "surplus_eur_mwh": prices["surplus"].to_numpy(),
                "forecast_eur_mwh": forecast.to_numpy(dtype=float),
            }
        )
        logging.info(
            f"💰 Settled {len(index)} ISPs ({self.config.price_system}-price): "
            f"day-ahead {chosen.day_ahead_cost:.2f} EUR, imbalance {chosen.imbalance_cost:.2f} EUR"
        )
        return isps, chosen.to_frame(), costs
