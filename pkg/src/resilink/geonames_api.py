"""Online gazetteer client speaking the GeoNames JSON web-service protocol.

The client is the one stateful component in the enrichment path: all
requests funnel through a shared rate limiter, and transient failures
(5xx, timeouts) are retried up to three attempts. Results map onto the
same entry types the offline index uses, so online and offline providers
are interchangeable.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import requests

from .gazetteer import GazetteerEntry, PostalCodeEntry
from .model import GeoPoint, ResilinkError


class GeoNamesError(ResilinkError):
    pass


class RateLimitedError(GeoNamesError):
    """The service reported request throttling (HTTP 429)."""


class GeoNamesNetworkError(GeoNamesError):
    pass


class ServiceError(GeoNamesError):
    def __init__(self, status: int):
        self.status = status
        super().__init__(f"service error: HTTP {status}")


class RateLimiter:
    """Serializes callers so requests never exceed rate_per_sec."""

    def __init__(self, rate_per_sec: float):
        if rate_per_sec <= 0:
            raise ValueError("rate must be positive")
        self._interval = 1.0 / rate_per_sec
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            slot = max(now, self._next)
            self._next = slot + self._interval
        delay = slot - time.monotonic()
        if delay > 0:
            time.sleep(delay)


@dataclass
class GeoNamesClient:
    """Client for findNearbyPlaceNameJSON / findNearbyPostalCodesJSON / getJSON."""

    base_url: str
    username: str
    rate_per_sec: float = 1.0
    timeout_s: float = 10.0
    max_attempts: int = 3

    def __post_init__(self):
        self.base_url = self.base_url.rstrip("/")
        self._limiter = RateLimiter(self.rate_per_sec)
        self._session = requests.Session()

    def _request(self, path: str, params: dict) -> dict:
        last_status = None
        for _ in range(self.max_attempts):
            self._limiter.wait()
            try:
                resp = self._session.get(
                    f"{self.base_url}/{path}",
                    params={**params, "username": self.username},
                    timeout=self.timeout_s,
                )
            except requests.Timeout:
                last_status = None
                continue
            except requests.RequestException as exc:
                raise GeoNamesNetworkError(str(exc)) from exc
            if resp.status_code == 429:
                raise RateLimitedError("throttled by service")
            if resp.status_code >= 500:
                last_status = resp.status_code
                continue
            if resp.status_code != 200:
                raise ServiceError(resp.status_code)
            return resp.json()
        if last_status is None:
            raise GeoNamesNetworkError("timed out after retries")
        raise ServiceError(last_status)

    @staticmethod
    def _entry_from_payload(obj: dict) -> GazetteerEntry:
        alternates = tuple(
            (alt.get("lang", ""), alt["name"])
            for alt in obj.get("alternateNames", ())
            if alt.get("name")
        )
        return GazetteerEntry(
            geoname_id=int(obj["geonameId"]),
            name=obj.get("name", ""),
            ascii_name=obj.get("asciiName", obj.get("toponymName", "")),
            alternate_names=alternates,
            point=GeoPoint(float(obj["lat"]), float(obj["lng"])),
            feature_class=obj.get("fcl", ""),
            feature_code=obj.get("fcode", ""),
            country_code=obj.get("countryCode", ""),
            admin1_code=obj.get("adminCode1", ""),
        )

    def find_nearby_place(self, lat: float, lng: float) -> GazetteerEntry | None:
        payload = self._request("findNearbyPlaceNameJSON", {"lat": lat, "lng": lng})
        hits = payload.get("geonames", [])
        return self._entry_from_payload(hits[0]) if hits else None

    def find_nearby_postal(self, lat: float, lng: float) -> PostalCodeEntry | None:
        payload = self._request("findNearbyPostalCodesJSON", {"lat": lat, "lng": lng})
        hits = payload.get("postalCodes", [])
        if not hits:
            return None
        obj = hits[0]
        return PostalCodeEntry(
            country_code=obj.get("countryCode", ""),
            postal_code=str(obj["postalCode"]),
            place_name=obj.get("placeName", ""),
            point=GeoPoint(float(obj["lat"]), float(obj["lng"])),
        )

    def get_entry(self, geoname_id: int) -> GazetteerEntry:
        payload = self._request("getJSON", {"geonameId": geoname_id})
        if "geonameId" not in payload:
            raise ServiceError(404)
        return self._entry_from_payload(payload)
