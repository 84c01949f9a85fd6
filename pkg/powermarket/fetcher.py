import logging
import time
from pathlib import Path
from typing import Literal, Union

import requests
from requests_ratelimiter import LimiterSession

from .base import ConfigError, DataError, FetchError, RateLimitError
from .market import ingest_imbalance, ingest_spot

PriceKind = Literal["spot", "imbalance"]


class PriceFetcher:
    """Rate-limited downloader for spot and imbalance price exports.

    Example:
        >>> fetcher = PriceFetcher()
        >>> fetcher.download("https://example.org/spot.csv", "data/spot.csv", "spot")

    Attributes:
        timeout: Seconds before a request is abandoned
        retry_delay: Seconds to wait before the single retry after HTTP 429
        session: Rate-limited HTTP session (1 request per second)
    """

    def __init__(self, timeout: float = 30.0, retry_delay: float = 5.0, verify_ssl: bool = True):
        self.timeout = timeout
        self.retry_delay = retry_delay
        self.verify_ssl = verify_ssl
        self.session = LimiterSession(per_second=1)

    def _get(self, url: str, retried: bool = False) -> bytes:
        try:
            response = self.session.request(method="GET", url=url, timeout=self.timeout, verify=self.verify_ssl)

            if response.status_code == 429:
                if retried:
                    raise RateLimitError(f"HTTP 429 from {url} after retry", response.status_code, response.text[:200])
                logging.warning(f"⚡️ Rate limit exceeded. Retrying in {self.retry_delay:g} seconds...")
                time.sleep(self.retry_delay)
                return self._get(url, retried=True)

            response.raise_for_status()
            return response.content

        except requests.exceptions.HTTPError as e:
            raise FetchError(f"HTTP {response.status_code}: {e} - {response.text[:200]}", response.status_code, response.text)

        except requests.exceptions.Timeout:
            raise FetchError(f"Request timed out after {self.timeout:g} seconds")

        except requests.exceptions.ConnectionError as e:
            raise FetchError(f"Connection error: {e}")

        except requests.exceptions.RequestException as e:
            raise FetchError(f"Request failed: {e}")

    def download(self, url: str, dest: Union[str, Path], kind: PriceKind) -> Path:
        """Download a price export, check that it ingests, and write it to dest.

        Args:
            url: Export URL
            dest: Target file; left untouched when validation fails
            kind: "spot" for hourly day-ahead prices, "imbalance" for per-ISP prices

        Returns:
            The written path

        Raises:
            ConfigError: If kind is unknown
            FetchError: If the download fails
            RateLimitError: If the server still answers 429 after one retry
            DataError: If the downloaded file does not ingest
        """
        if kind not in ("spot", "imbalance"):
            raise ConfigError(f"Unknown price kind '{kind}' (expected spot or imbalance)")

        logging.info(f"📡 Fetching {kind} prices from {url}")
        content = self._get(url)

        dest = Path(dest)
        dest.parent.mkdir(parents=True, exist_ok=True)
        partial = dest.with_name(dest.name + ".part")
        partial.write_bytes(content)
        try:
            rows = len(ingest_spot(partial) if kind == "spot" else ingest_imbalance(partial))
        except DataError:
            partial.unlink()
            raise
        partial.replace(dest)
        logging.info(f"✅ Saved {rows} {kind} prices to {dest}")
        return dest
