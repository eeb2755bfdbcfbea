# Tests package for Keyword Research Tool
