import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from .base import DataError, DomainError
from .market import parse_utc
from .tables import ISP_SECONDS
from .types import AaMode, InferenceMode, IspForecast, SyntheticPredictor

"""
Shortage-price forecasts: ingested ML inferences, synthetic Gaussian
predictors and the agreement-accuracy metric.
"""

INFERENCE_COLUMNS = ["prediction_time_iso8601", "target_isp_start_iso8601", "predicted_shortage_eur_mwh"]
MAX_PREDICTIONS_PER_ISP = ISP_SECONDS // 60


def load_inferences(path: Union[str, Path]) -> Dict[pd.Timestamp, IspForecast]:
    """Read minute-by-minute ML inferences, grouped by the ISP they predict.

    Minutes may be missing; each target ISP keeps its predictions in
    prediction-time order.

    Raises:
        DataError: If timestamps lack offsets, a prediction is not made during the
            preceding ISP, or an ISP has more than 15 predictions
    """
    try:
        frame = pd.read_csv(path, encoding="utf-8", dtype={INFERENCE_COLUMNS[0]: str, INFERENCE_COLUMNS[1]: str})
    except FileNotFoundError:
        raise DataError(f"Inference file not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot parse {path}: {e}")

    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in INFERENCE_COLUMNS if column not in frame.columns]
    if missing:
        raise DataError(f"{path} is missing columns {missing}", details=missing)
    if frame[INFERENCE_COLUMNS].isna().any().any():
        raise DataError(f"{path} has empty cells")

    predicted_at = parse_utc(frame["prediction_time_iso8601"], str(path))
    targets = parse_utc(frame["target_isp_start_iso8601"], str(path))
    try:
        values = frame["predicted_shortage_eur_mwh"].astype(float).to_numpy()
    except ValueError as e:
        raise DataError(f"{path}: non-numeric prediction: {e}")

    isp = pd.Timedelta(seconds=ISP_SECONDS)
    outside = (predicted_at < targets - isp) | (predicted_at >= targets)
    if outside.any():
        bad = sorted(set(targets[outside]))
        raise DataError(f"{path}: {int(outside.sum())} predictions were not made during the preceding ISP", details=bad)

    table = pd.DataFrame({"predicted_at": predicted_at, "target": targets, "value": values})
    table = table.sort_values(["target", "predicted_at"], kind="mergesort")

    forecasts = {}
    for target, group in table.groupby("target", sort=True):
        if len(group) > MAX_PREDICTIONS_PER_ISP:
            raise DataError(f"{path}: ISP {target} has {len(group)} predictions (at most {MAX_PREDICTIONS_PER_ISP})", details=[target])
        forecasts[pd.Timestamp(target)] = IspForecast(isp_start=pd.Timestamp(target), minute_predictions=tuple(group["value"]))
    logging.info(f"🔮 Loaded inferences for {len(forecasts)} ISPs from {path}")
    return forecasts


def select_inference(forecast: IspForecast, mode: InferenceMode) -> float:
    """Reduce an ISP's minute predictions to one forecast price.

    Raises:
        DomainError: If there are no predictions or the mode is unknown
    """
    predictions = forecast.minute_predictions
    if not predictions:
        raise DomainError(f"no predictions for ISP {forecast.isp_start}")
    if mode == "first":
        return float(predictions[0])
    elif mode == "last":
        return float(predictions[-1])
    elif mode == "average":
        return float(np.mean(predictions))
    raise DomainError(f"unknown inference mode: {mode}")


def forecast_series(forecasts: Dict[pd.Timestamp, IspForecast], mode: InferenceMode) -> pd.Series:
    """Selected forecast price per ISP start."""
    index = pd.DatetimeIndex(sorted(forecasts), tz="UTC") if forecasts else pd.DatetimeIndex([], tz="UTC")
    return pd.Series([select_inference(forecasts[isp], mode) for isp in index], index=index, dtype=float, name="forecast")


def split_seeds(seed: int, n: int) -> List[int]:
    """Derive n independent 64-bit sub-seeds: SeedSequence(seed).spawn(n), first state word of each child."""
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in np.random.SeedSequence(seed).spawn(n)]


def synth_forecast(actual: Union[Sequence[float], pd.Series], sigma: float, seed: int) -> Union[np.ndarray, pd.Series]:
    """Synthetic predictor: the actual shortage price plus N(0, sigma) noise per ISP.

    Draws come from numpy's PCG64 generator seeded with `seed`, so a series is
    reproducible across runs and platforms.
    """
    predictor = SyntheticPredictor(sigma=sigma, seed=seed)
    values = np.asarray(actual, dtype=float)
    if predictor.sigma == 0:
        noisy = values.copy()
    else:
        generator = np.random.Generator(np.random.PCG64(predictor.seed))
        noisy = values + generator.normal(0.0, predictor.sigma, size=values.shape)
    if isinstance(actual, pd.Series):
        return pd.Series(noisy, index=actual.index, name="forecast")
    return noisy


def agreement_accuracy(
    p_b: Sequence[float],
    p_f: Sequence[float],
    p_s: Sequence[float],
    mode: AaMode = "literal",
) -> float:
    """Share of ISPs on which forecast and actual prices lead to the same decisions.

    Per ISP, bit one says whether forecast and actual shortage price share a sign,
    bit two whether both sit on the same side of the spot price (sign(0) = 0).
    The literal score counts ISPs where the two bits are equal; the conjunction
    score counts ISPs where both bits are set.

    Raises:
        DomainError: If the series are empty or differ in length
    """
    p_b = np.asarray(p_b, dtype=float)
    p_f = np.asarray(p_f, dtype=float)
    p_s = np.asarray(p_s, dtype=float)
    if not (len(p_b) == len(p_f) == len(p_s)):
        raise DomainError(f"series lengths differ: {len(p_b)}, {len(p_f)}, {len(p_s)}")
    if len(p_b) == 0:
        raise DomainError("agreement accuracy needs at least one ISP")

    sign_bit = np.sign(p_b) == np.sign(p_f)
    spot_bit = np.sign(p_b - p_s) == np.sign(p_f - p_s)
    if mode == "literal":
        agreed = sign_bit == spot_bit
    elif mode == "conjunction":
        agreed = sign_bit & spot_bit
    else:
        raise DomainError(f"unknown agreement mode: {mode}")
    return float(agreed.mean())


def aa_sweep(
    p_b: Sequence[float],
    p_s: Sequence[float],
    sigmas: Sequence[float],
    seeds: int,
    base_seed: int = 0,
    mode: AaMode = "literal",
) -> pd.DataFrame:
    """Mean and spread of agreement accuracy of synthetic predictors per sigma.

    Every sigma reuses the same `seeds` sub-seeds from split_seeds(base_seed, seeds),
    so the noise differs between sigmas only in scale.

    Returns:
        Frame with columns sigma, mean_aa, std_aa, min_aa, max_aa
    """
    if seeds < 1:
        raise DomainError(f"need at least one seed, got {seeds}")
    sub_seeds = split_seeds(base_seed, seeds)
    rows = []
    for sigma in sigmas:
        scores = np.array([agreement_accuracy(p_b, synth_forecast(p_b, sigma, s), p_s, mode) for s in sub_seeds])
        rows.append(
            {
                "sigma": float(sigma),
                "mean_aa": float(scores.mean()),
                "std_aa": float(scores.std()),
                "min_aa": float(scores.min()),
                "max_aa": float(scores.max()),
            }
        )
        logging.debug(f"🎲 sigma={sigma}: mean AA {scores.mean():.4f}")
    return pd.DataFrame(rows, columns=["sigma", "mean_aa", "std_aa", "min_aa", "max_aa"])
