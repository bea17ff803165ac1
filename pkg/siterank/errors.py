"""Exception hierarchy; each family maps to one CLI exit status."""


class SiteRankError(Exception):
    exit_code = 2


class UsageError(SiteRankError):
    exit_code = 1


class DataError(SiteRankError):
    exit_code = 2


class ConvergenceError(SiteRankError):
    exit_code = 3
