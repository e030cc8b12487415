import pytest

from cases import PAPER_CASES, paper_protocol


@pytest.fixture(params=sorted(PAPER_CASES))
def any_protocol(request):
    return paper_protocol(request.param)
