"""Participants, posts and ratings; admission; user-day datasets; synthetic cohorts."""

from .dataset import (
    COMPUTATIONAL_FEATURES, RATING_FEATURES, Admission, AggregationResult, FeatureMatrix, RatingAggregate, UserDay,
    admit_cohort, admit_participant, aggregate_ratings, aggregate_user_days, build_feature_matrix, dataset_counts,
    matrix_to_csv, pre_diagnosis_posts, read_matrix_csv, select_rating_subset, split_pre_diagnosis, standardize,
    summary_stats,
)
from .records import (
    NO_FILTER, Participant, Post, Rating, RecordError, parse_timestamp, read_participants, read_posts,
    read_ratings, score_cesd,
)
from .synth import Cohort, CohortSpec, generate_cohort, group_parameters
