"""Shared fixtures for the test suite."""

import pytest

# Four-row reference trace in canonical CSV form.  The first and third rows
# ran under LTE-first priority (with raw interface tags), the second and
# fourth under WiFi-first; rows 1-2 and 3-4 form the two mergeable pairs.
REFERENCE_TRACE = """\
t,rssi_lte,rssi_wifi,sinr_lte,sinr_wifi,rsrp_lte,rsrq_lte,td_wifi,rd_wifi,rtt_lte,rtt_wifi,cwnd_lte,cwnd_wifi,plr_lte,plr_wifi,pdr_lte,pdr_wifi,prio,ag,ad
0,-39,-29,17,22,-62,-12,3.7,13.2,48,21,12,30,0%,0.03%,8.3,4.5,LF(4G),11.3,47
1,-42,-27,12,19,-58,-14,9.4,22.5,52,19,10,34,0.01%,0.04%,3.4,16.2,WF,17.4,35
10,-51,-39,19,24,-103,-8,6.7,16.3,44,25,16,26,0%,0.1%,23.2,5.4,LF(5G),24.1,58
11,-48,-37,23,25,-98,-10,14.1,28.2,46,23,14,28,0%,0.08%,5.1,11.6,WF,13.4,43
"""


@pytest.fixture
def reference_trace_text():
    return REFERENCE_TRACE


@pytest.fixture
def reference_samples():
    from smartps import traceio
    return traceio.parse_trace(REFERENCE_TRACE)
