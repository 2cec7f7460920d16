"""
Factory Pattern für Atomzahlmodelle.

Erzeugt kohärente, gequetschte oder Fock-Statistik flexibel über den
Modellnamen aus der Konfiguration, ohne dass Array-Dynamik oder Service
die konkreten Klassen kennen.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from model.constants import (
    DEFAULT_SQUEEZING_FORMULA,
    NUMBER_MODEL_COHERENT,
    NUMBER_MODEL_FOCK,
    NUMBER_MODEL_SQUEEZED,
    SQUEEZING_FORMULAS,
)
from model.entities import NumberStatistics
from model.errors import DomainError
from model.quantum_states import _squeezed_sigma_unchecked, squeezed_sigma

# Abstrakte Klasse NumberModel mit site_sigmas()


class NumberModel(ABC):
    """
    Abstrakte Basisklasse aller Zahlmodelle.

    Definiert die gemeinsame Schnittstelle: Zahlbreite pro Platz und
    Statistik für einen einzelnen Platz.
    """

    name: str

    @abstractmethod
    def site_sigmas(self, occupations: np.ndarray, g_beta: float, gamma: float) -> np.ndarray:
        """Zahlbreite je Platz für beliebige (auch kleine) Besetzungen."""

    def statistics(self, mean_n: float, g_beta: float, gamma: float) -> NumberStatistics:
        """Statistik eines einzelnen Platzes mit Besetzung mean_n."""
        sigma = float(self.site_sigmas(np.array([mean_n]), g_beta, gamma)[0])
        return NumberStatistics(mean_n=mean_n, sigma_n=min(sigma, math.sqrt(mean_n)), regime=self.name)

    def describe(self) -> str:
        return self.name


# Konkrete Implementierungen


@dataclass
class CoherentNumberModel(NumberModel):
    """Poisson-Statistik sigma = sqrt(N)."""

    name: str = NUMBER_MODEL_COHERENT

    def site_sigmas(self, occupations: np.ndarray, g_beta: float, gamma: float) -> np.ndarray:
        return np.sqrt(occupations)

    def statistics(self, mean_n: float, g_beta: float, gamma: float) -> NumberStatistics:
        return NumberStatistics(mean_n=mean_n, sigma_n=math.sqrt(mean_n), regime=self.name)


@dataclass
class SqueezedNumberModel(NumberModel):
    """
    Gequetschte Statistik sigma_S(N) aus dem Verhältnis von Wechselwirkung und Tunneln.
    """

    formula: str = DEFAULT_SQUEEZING_FORMULA
    name: str = NUMBER_MODEL_SQUEEZED

    def site_sigmas(self, occupations: np.ndarray, g_beta: float, gamma: float) -> np.ndarray:
        if gamma <= 0:
            raise DomainError("Gequetschte Statistik verlangt gamma > 0")
        return _squeezed_sigma_unchecked(occupations, g_beta, gamma, SQUEEZING_FORMULAS[self.formula])

    def statistics(self, mean_n: float, g_beta: float, gamma: float) -> NumberStatistics:
        sigma = squeezed_sigma(mean_n, g_beta, gamma, self.formula)
        return NumberStatistics(mean_n=mean_n, sigma_n=min(sigma, math.sqrt(mean_n)), regime=self.name)

    def describe(self) -> str:
        return f"{self.name} ({self.formula})"


@dataclass
class FockNumberModel(NumberModel):
    """Scharfe Atomzahl (sigma = 0)."""

    name: str = NUMBER_MODEL_FOCK

    def site_sigmas(self, occupations: np.ndarray, g_beta: float, gamma: float) -> np.ndarray:
        return np.zeros_like(occupations, dtype=float)

    def statistics(self, mean_n: float, g_beta: float, gamma: float) -> NumberStatistics:
        return NumberStatistics(mean_n=mean_n, sigma_n=0.0, regime=self.name)


# NumberModelFactory mit create_model(type: str)


class NumberModelFactory:
    """
    Factory zum Erstellen der Zahlmodelle.
    """

    @staticmethod
    def create_model(model_type: str, **kwargs) -> NumberModel:
        """
        Erstellt ein Zahlmodell basierend auf dem Typ.

        Die Factory Method entscheidet anhand des Typs, welche konkrete
        Klasse instanziiert wird; "squeezed" akzeptiert formula=...
        """
        # Normalisiere Typ (lowercase, trim)
        model_type = model_type.lower().strip()

        if model_type == NUMBER_MODEL_COHERENT:
            return CoherentNumberModel()
        elif model_type == NUMBER_MODEL_SQUEEZED:
            formula = kwargs.get("formula", DEFAULT_SQUEEZING_FORMULA)
            if formula not in SQUEEZING_FORMULAS:
                raise DomainError(f"Unbekannte Squeezing-Formel: '{formula}'")
            return SqueezedNumberModel(formula=formula)
        elif model_type == NUMBER_MODEL_FOCK:
            return FockNumberModel()
        else:
            # Unbekannter Typ -> Fehler
            raise DomainError(f"Unbekanntes Zahlmodell: '{model_type}'")
