"""Copula and vine estimation of distribution algorithms."""
