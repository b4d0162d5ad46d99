import re

key_regex = r'[A-Za-z_][A-Za-z0-9_]*'
number_regex = r'[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?'
regexes = {
    "BLANK_LINE": re.compile(r'^\s*$'),
    "COMMENT_LINE": re.compile(r'^\s*#.*$'),
    "CONFIG_LINE": re.compile(rf'^\s*({key_regex})\s*=\s*([^#]*?)\s*(?:#.*)?$'),
}

value_regexes = {
    "INTEGER": re.compile(r'^[+-]?\d+$'),
    "FLOAT": re.compile(rf'^(?:{number_regex}|[+-]?inf|nan)$'),
    "INT_LIST": re.compile(r'^(?:[+-]?\d+(?:\s*,\s*[+-]?\d+)*)?$'),
}


def match_line(line):
    for line_type, regex in regexes.items():
        match = regex.match(line)
        if match:
            return match.groups(), line_type
    return None, None


def match_value(value, value_type):
    return value_regexes[value_type].match(value) is not None
