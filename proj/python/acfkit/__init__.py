import json

from ._acfkit import *  # noqa: F401,F403
from ._acfkit import vote_report_json


def vote_report(mode, **kwargs):
    """Same report as `acfkit vote <mode>`, as a dict."""
    return json.loads(vote_report_json(mode, **kwargs))
