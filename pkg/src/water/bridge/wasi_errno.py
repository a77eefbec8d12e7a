"""Preview-1 errno values used by the host implementation."""

SUCCESS = 0
AGAIN = 6
BADF = 8
CANCELED = 11
CONNABORTED = 13
CONNRESET = 15
FAULT = 21
INVAL = 28
IO = 29
NOSYS = 52
NOTCONN = 53
NOTSOCK = 57
NOTSUP = 58
PIPE = 64
SPIPE = 70
