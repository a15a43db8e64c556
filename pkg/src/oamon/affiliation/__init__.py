from .detect import DetectionResult, DetectionSource, detect_country, detect_records, read_hal_countries
from .names import AuthorNameIndex, prefilter_author_match
from .parsers import AffiliationParser, default_parsers, extract_affiliations, register_plugin
from .rules import AffiliationString, CountryRuleset, Origin, load_ruleset, match_country
from .sources import DocumentSource, FixtureDirectorySource, HttpDocumentSource, TokenBucket, fixture_filename

__all__ = [
    "AffiliationParser", "AffiliationString", "AuthorNameIndex", "CountryRuleset", "DetectionResult",
    "DetectionSource", "DocumentSource", "FixtureDirectorySource", "HttpDocumentSource", "Origin",
    "TokenBucket", "default_parsers", "detect_country", "detect_records", "extract_affiliations", "fixture_filename",
    "load_ruleset", "match_country", "prefilter_author_match", "read_hal_countries", "register_plugin",
]
