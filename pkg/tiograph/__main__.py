# -*- coding: utf-8 -*-
import sys

from .cli import main

__author__ = 'luckydonald'

if __name__ == '__main__':
    sys.exit(main())
# end if
