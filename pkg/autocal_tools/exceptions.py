#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# Usage and domain problems subclass ValueError so plain `except ValueError` keeps working.
class UsageError(ValueError):
    pass

class DomainError(ValueError):
    pass

class DataError(ValueError):
    pass

class NumericError(ArithmeticError):
    pass

class SingularFitError(NumericError):
    pass

class DivergenceError(NumericError):
    pass

class DegenerateError(NumericError):
    pass
