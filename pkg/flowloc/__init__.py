"""FlowLoc: electrical-flow localization on weighted multigraphs"""

from flowloc.utils.config import APP_VERSION as __version__
