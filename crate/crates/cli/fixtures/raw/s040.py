w = input().split()
w.reverse
print(*w, '')
