"""Contingency chi-squared, Pearson correlation tables and inter-rater agreement."""

from .correlation import AgreementReport, CorrelationTable, correlation_matrix, interrater_agreement, pearson_r
from .contingency import Chi2Result, ContingencyTable, chi2_independence, chi2_upper_tail
