from .kernel import (
    AllZeroDifferences,
    ConstantInput,
    average_ranks,
    binomial_test_one_sided,
    mann_whitney_u,
    pearson_r,
    wilcoxon_signed_rank,
)
from .analysis import (
    AgreementReport,
    PairedScores,
    SurveyAnalysis,
    analyze_survey,
    compare_graders,
    pair_scores,
)

__all__ = [
    "AgreementReport",
    "AllZeroDifferences",
    "ConstantInput",
    "PairedScores",
    "SurveyAnalysis",
    "analyze_survey",
    "average_ranks",
    "binomial_test_one_sided",
    "compare_graders",
    "mann_whitney_u",
    "pair_scores",
    "pearson_r",
    "wilcoxon_signed_rank",
]
