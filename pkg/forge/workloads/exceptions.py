"""
Forge error hierarchy
Input-shaped errors also derive from ValueError
"""


class ForgeError(Exception):
    """Base class for every forge failure"""


class SchemaError(ForgeError, ValueError):
    """Schema file is malformed or violates a catalog invariant"""

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f'{location}: {message}'
        super().__init__(message)


class DataLoadError(ForgeError, ValueError):
    """Table data file is missing, ragged or mistyped"""

    def __init__(self, message, table=None, row=None, column=None):
        self.table = table
        self.row = row
        self.column = column
        super().__init__(message)


class SqlSyntaxError(ForgeError, ValueError):
    """SQL text could not be parsed"""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f'{message} at byte offset {offset}')


class UnsupportedConstructError(ForgeError, ValueError):
    """SQL text uses a construct outside the supported subset"""

    def __init__(self, construct, offset=None):
        self.construct = construct
        self.offset = offset
        where = f' at byte offset {offset}' if offset is not None else ''
        super().__init__(f'Unsupported construct: {construct}{where}')


class MissingStatisticsError(ForgeError, ValueError):
    """A generation strategy needs statistics that were not computed"""

    def __init__(self, column, detail='statistics'):
        self.column = column
        super().__init__(f'Missing {detail} for column {column}')


class LabelingError(ForgeError):
    """A query could not be executed over the loaded data"""


class PlanningError(ForgeError):
    """Plans could not be enumerated or costed"""


class ConfigError(ForgeError, ValueError):
    """Run configuration is invalid"""


class MissingArtifactError(ForgeError):
    """A stage needs an artifact that an upstream stage did not produce"""

    def __init__(self, path, stage=None):
        self.path = path
        hint = f' (run the {stage} stage first)' if stage else ''
        super().__init__(f'Missing artifact: {path}{hint}')
