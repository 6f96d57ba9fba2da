import sys
w = sys.stdin.readline().split()
print(' '.join(reversed(w)), w[5])
